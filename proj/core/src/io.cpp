#include "dagpo/io.hpp"

#include <fstream>
#include <sstream>

#include "dagpo/errors.hpp"

namespace dagpo {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed: " + path);
    return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + path);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::string text = read_file(path);
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) {
            if (start < text.size()) lines.push_back(text.substr(start));
            break;
        }
        std::string line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
        start = end + 1;
    }
    return lines;
}

std::vector<OrderedDag> read_dataset(const std::string& path) {
    auto lines = read_lines(path);
    std::vector<OrderedDag> out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        try {
            out.push_back(topological_order(dag_from_json(lines[i])));
        } catch (const ParseError& e) {
            throw ParseError(path + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    if (out.empty()) throw EmptyDataset("dataset has no graphs: " + path);
    return out;
}

void write_dataset(const std::string& path, const std::vector<OrderedDag>& graphs) {
    std::string buf;
    for (const auto& g : graphs) {
        buf += to_json(g);
        buf += '\n';
    }
    write_file(path, buf);
}

} // namespace dagpo

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dagpo/dag.hpp"

namespace dagpo {

// Whole-file text helpers. Throw IoError on any filesystem failure.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// Lines without their newline; a trailing empty line is dropped.
std::vector<std::string> read_lines(const std::string& path);

// Dataset files: one Dag JSON object per line. Graphs are canonicalized on
// load. Throws ParseError (with the offending line number), CycleDetected,
// EmptyDataset when no graphs are present, IoError.
std::vector<OrderedDag> read_dataset(const std::string& path);
void write_dataset(const std::string& path, const std::vector<OrderedDag>& graphs);

} // namespace dagpo

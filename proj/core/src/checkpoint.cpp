#include "dagpo/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "dagpo/errors.hpp"
#include "dagpo/io.hpp"

namespace dagpo {

namespace {

constexpr char kMagic[8] = {'D', 'G', 'P', 'O', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

// Little-endian primitive writers.
void put_u8(std::string& buf, std::uint8_t v) { buf.push_back(static_cast<char>(v)); }

void put_u32(std::string& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_i32(std::string& buf, std::int32_t v) { put_u32(buf, static_cast<std::uint32_t>(v)); }
void put_i64(std::string& buf, std::int64_t v) { put_u64(buf, static_cast<std::uint64_t>(v)); }
void put_f64(std::string& buf, double v) { put_u64(buf, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::string& buf, std::string_view s) {
    put_u64(buf, s.size());
    buf.append(s.data(), s.size());
}

void put_f64_vec(std::string& buf, const std::vector<double>& v) {
    put_u64(buf, v.size());
    for (double x : v) put_f64(buf, x);
}

struct Reader {
    std::string_view data;
    std::size_t pos = 0;

    void need(std::size_t bytes) const {
        if (pos + bytes > data.size()) throw CheckpointError("checkpoint truncated");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(data[pos++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(data[pos + static_cast<std::size_t>(i)]))
                 << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(data[pos + static_cast<std::size_t>(i)]))
                 << (8 * i);
        pos += 8;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        std::uint64_t len = u64();
        if (len > data.size() - pos) throw CheckpointError("checkpoint truncated");
        std::string s(data.substr(pos, len));
        pos += len;
        return s;
    }
    std::vector<double> f64_vec() {
        std::uint64_t len = u64();
        if (len > (data.size() - pos) / 8) throw CheckpointError("checkpoint truncated");
        std::vector<double> v(len);
        for (auto& x : v) x = f64();
        return v;
    }
};

void put_gradients(std::string& buf, const Gradients& g) {
    put_u64(buf, g.gW.size());
    for (std::size_t l = 0; l < g.gW.size(); ++l) {
        put_f64_vec(buf, g.gW[l]);
        put_f64_vec(buf, g.gb[l]);
    }
}

Gradients read_gradients(Reader& r) {
    Gradients g;
    std::uint64_t layers = r.u64();
    if (layers > 1 << 20) throw CheckpointError("checkpoint layer count implausible");
    g.gW.resize(layers);
    g.gb.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        g.gW[l] = r.f64_vec();
        g.gb[l] = r.f64_vec();
    }
    return g;
}

} // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
    std::string buf;
    buf.append(kMagic, sizeof(kMagic));
    put_u32(buf, kVersion);

    put_string(buf, ck.space.name);
    put_i32(buf, ck.space.max_nodes);
    put_i32(buf, ck.space.node_cats);
    put_i32(buf, ck.space.edge_cats);
    put_u8(buf, static_cast<std::uint8_t>(ck.space.rules));

    put_i32(buf, ck.schedule_T);
    put_f64(buf, ck.schedule_s);

    const auto& d = ck.params.dims;
    put_i32(buf, d.n);
    put_i32(buf, d.node_cats);
    put_i32(buf, d.edge_cats);
    put_i32(buf, d.pe_dim);
    put_i32(buf, d.hidden);
    put_i32(buf, d.hidden_layers);
    put_i32(buf, ck.params.T);
    put_u64(buf, ck.params.layers.size());
    for (const auto& l : ck.params.layers) {
        put_i32(buf, l.in);
        put_i32(buf, l.out);
        put_u8(buf, l.frozen ? 1 : 0);
        put_f64_vec(buf, l.W);
        put_f64_vec(buf, l.b);
    }

    AdamWState opt = ck.optimizer.state();
    put_f64(buf, opt.cfg.beta1);
    put_f64(buf, opt.cfg.beta2);
    put_f64(buf, opt.cfg.eps);
    put_f64(buf, opt.cfg.weight_decay);
    put_i64(buf, opt.step_count);
    put_gradients(buf, opt.m);
    put_gradients(buf, opt.v);

    put_string(buf, ck.rng_state);
    put_i32(buf, ck.epoch);
    return buf;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    Reader r{bytes};
    r.need(sizeof(kMagic));
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError("not a checkpoint file (bad magic)");
    r.pos = sizeof(kMagic);
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

    Checkpoint ck;
    ck.space.name = r.str();
    ck.space.max_nodes = r.i32();
    ck.space.node_cats = r.i32();
    ck.space.edge_cats = r.i32();
    std::uint8_t rules = r.u8();
    if (rules > 2) throw CheckpointError("unknown space rule set in checkpoint");
    ck.space.rules = static_cast<SpaceRules>(rules);

    ck.schedule_T = r.i32();
    ck.schedule_s = r.f64();

    auto& d = ck.params.dims;
    d.n = r.i32();
    d.node_cats = r.i32();
    d.edge_cats = r.i32();
    d.pe_dim = r.i32();
    d.hidden = r.i32();
    d.hidden_layers = r.i32();
    ck.params.T = r.i32();
    std::uint64_t nlayers = r.u64();
    if (nlayers > 1 << 20) throw CheckpointError("checkpoint layer count implausible");
    ck.params.layers.resize(nlayers);
    for (auto& l : ck.params.layers) {
        l.in = r.i32();
        l.out = r.i32();
        l.frozen = r.u8() != 0;
        l.W = r.f64_vec();
        l.b = r.f64_vec();
        if (l.W.size() != static_cast<std::size_t>(l.in) * static_cast<std::size_t>(l.out) ||
            l.b.size() != static_cast<std::size_t>(l.out))
            throw CheckpointError("checkpoint layer tensor sizes are inconsistent");
    }

    AdamWState opt;
    opt.cfg.beta1 = r.f64();
    opt.cfg.beta2 = r.f64();
    opt.cfg.eps = r.f64();
    opt.cfg.weight_decay = r.f64();
    opt.step_count = r.i64();
    opt.m = read_gradients(r);
    opt.v = read_gradients(r);
    ck.optimizer = AdamW::from_state(std::move(opt));

    ck.rng_state = r.str();
    ck.epoch = r.i32();
    if (r.pos != bytes.size()) throw CheckpointError("checkpoint has trailing bytes");
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    write_file(path, serialize_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::string& path) {
    return deserialize_checkpoint(read_file(path));
}

} // namespace dagpo

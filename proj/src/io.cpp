#include "fc/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "FCWT/FCFT readers assume a little-endian host");

namespace fc::io {

namespace {

constexpr char kWeightsMagic[8] = {'F', 'C', 'W', 'T', '0', '0', '0', '1'};
constexpr char kFeaturesMagic[8] = {'F', 'C', 'F', 'T', '0', '0', '0', '1'};

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32(std::istream& in, const std::string& what) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) fail("io_error", "truncated file while reading " + what);
    return v;
}

void check_magic(std::istream& in, const char (&magic)[8], const std::string& path) {
    char buf[8] = {};
    in.read(buf, 8);
    if (!in || std::memcmp(buf, magic, 8) != 0) {
        std::size_t offset = 0;
        while (offset < 8 && in && buf[offset] == magic[offset]) ++offset;
        fail("bad_magic", path + ": expected magic '" + std::string(magic, 8) +
                              "', mismatch at byte offset " + std::to_string(offset));
    }
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("io_error", "cannot open '" + path + "' for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("io_error", "cannot open '" + path + "' for reading");
    return in;
}

}  // namespace

void save_weights(const std::string& path, const encoder::EncoderWeights& w) {
    std::ofstream out = open_out(path);
    out.write(kWeightsMagic, 8);
    encoder::for_each_tensor(w, [&](const std::string& name, const Tensor& t) {
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (auto e : t.shape) write_u32(out, static_cast<std::uint32_t>(e));
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * 4));
    });
    if (!out) fail("io_error", "write failed for '" + path + "'");
}

std::map<std::string, Tensor> read_weight_entries(const std::string& path) {
    std::ifstream in = open_in(path);
    check_magic(in, kWeightsMagic, path);
    std::map<std::string, Tensor> entries;
    while (true) {
        std::uint32_t name_len = 0;
        in.read(reinterpret_cast<char*>(&name_len), 4);
        if (in.eof()) break;
        if (!in) fail("io_error", "truncated entry header in '" + path + "'");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rank = read_u32(in, "tensor rank");
        std::vector<std::size_t> shape(rank);
        for (auto& e : shape) e = read_u32(in, "tensor extent");
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * 4));
        if (!in) fail("io_error", "truncated tensor data for '" + name + "' in '" + path + "'");
        entries.emplace(std::move(name), std::move(t));
    }
    return entries;
}

encoder::EncoderWeights load_weights(const std::string& path, const encoder::EncoderConfig& cfg) {
    auto entries = read_weight_entries(path);
    encoder::EncoderWeights w = encoder::init_weights(cfg, 0);
    std::size_t used = 0;
    encoder::for_each_tensor(w, [&](const std::string& name, Tensor& t) {
        auto it = entries.find(name);
        if (it == entries.end()) fail("bad_weights", "missing tensor '" + name + "' in " + path);
        if (it->second.shape != t.shape)
            fail("bad_weights", "shape mismatch for tensor '" + name + "' in " + path);
        t = it->second;
        ++used;
    });
    if (used != entries.size())
        fail("bad_weights", path + " has " + std::to_string(entries.size() - used) +
                                " tensor(s) the config does not expect");
    return w;
}

void save_features(const std::string& path, const Tensor& features) {
    if (features.rank() != 2) fail("shape_mismatch", "features must be [T x F]");
    std::ofstream out = open_out(path);
    out.write(kFeaturesMagic, 8);
    write_u32(out, static_cast<std::uint32_t>(features.shape[0]));
    write_u32(out, static_cast<std::uint32_t>(features.shape[1]));
    out.write(reinterpret_cast<const char*>(features.data.data()),
              static_cast<std::streamsize>(features.data.size() * 4));
    if (!out) fail("io_error", "write failed for '" + path + "'");
}

Tensor load_features(const std::string& path) {
    std::ifstream in = open_in(path);
    check_magic(in, kFeaturesMagic, path);
    const std::uint32_t t = read_u32(in, "frame count");
    const std::uint32_t f = read_u32(in, "feature dim");
    Tensor features({t, f});
    in.read(reinterpret_cast<char*>(features.data.data()),
            static_cast<std::streamsize>(features.data.size() * 4));
    if (!in) fail("io_error", "truncated feature data in '" + path + "'");
    return features;
}

}  // namespace fc::io

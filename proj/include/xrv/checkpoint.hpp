#pragma once

// Model checkpoint file format.
//
//   magic   "XRVT" (4 bytes)
//   version u32 little-endian (currently 1)
//   spec    u32 LE byte length, then that many bytes of UTF-8 key=value
//           lines (model spec, epoch counter, optional class names)
//   count   u32 LE tensor count
//   per tensor:
//     name length u16 LE, UTF-8 name bytes
//     ndim u8, then ndim dims as u64 LE
//     dtype tag u8 (1 = 32-bit float, 2 = 64-bit float)
//     trainable flag u8
//     raw little-endian element data
//
// Tensors are written in sorted name order, so save -> load -> save is
// byte-identical. Parse failures report the byte offset.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "xrv/model.hpp"

namespace xrv {

inline constexpr char kCheckpointMagic[4] = {'X', 'R', 'V', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DtypeTag : std::uint8_t { f32 = 1, f64 = 2 };

template <typename T>
constexpr DtypeTag dtype_tag_of() {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>, "checkpoint supports float and double");
    return std::is_same_v<T, float> ? DtypeTag::f32 : DtypeTag::f64;
}

namespace detail {

class ByteWriter {
public:
    void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void raw(const void* p, std::size_t n) {
        const char* c = static_cast<const char*>(p);
        bytes_.insert(bytes_.end(), c, c + n);
    }
    void value(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void value(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

class ByteReader {
public:
    explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    std::size_t offset() const { return pos_; }
    bool at_end() const { return pos_ == bytes_.size(); }

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint16_t u16() {
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(u8()) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }

private:
    void need(std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw FormatError("checkpoint truncated at offset " + std::to_string(pos_) + " (needed " +
                              std::to_string(n) + " more bytes)");
        }
    }
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

inline std::string join_sizes(const std::vector<std::size_t>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

inline std::string join_strings(const std::vector<std::string>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    return os.str();
}

inline std::vector<std::size_t> parse_sizes(const std::string& s) {
    std::vector<std::size_t> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (!tok.empty()) out.push_back(static_cast<std::size_t>(std::stoull(tok)));
    }
    return out;
}

inline std::vector<std::string> parse_strings(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

}  // namespace detail

// Spec/metadata text block. Keys are written in a fixed order so the block
// is byte-stable.
template <typename T>
std::string encode_spec_block(const ModelState<T>& m) {
    const ModelSpec& s = m.spec;
    std::ostringstream os;
    os << "kind=" << to_string(s.kind) << "\n";
    os << "height=" << s.height << "\n";
    os << "width=" << s.width << "\n";
    os << "channels=" << s.channels << "\n";
    os << "num_classes=" << s.num_classes << "\n";
    os << "patch=" << s.patch << "\n";
    os << "embed_dim=" << s.embed_dim << "\n";
    os << "depth=" << s.depth << "\n";
    os << "heads=" << s.heads << "\n";
    os << "mlp_dim=" << s.mlp_dim << "\n";
    os << "stage_channels=" << detail::join_sizes(s.stage_channels) << "\n";
    os << "stage_blocks=" << detail::join_sizes(s.stage_blocks) << "\n";
    os << "head_hidden=" << s.head_hidden << "\n";
    os << "seed=" << s.seed << "\n";
    os << "creation_seed=" << m.creation_seed << "\n";
    os << "epoch=" << m.epoch << "\n";
    if (!m.class_names.empty()) os << "classes=" << detail::join_strings(m.class_names) << "\n";
    return os.str();
}

namespace detail {

struct SpecBlock {
    ModelSpec spec;
    std::uint64_t creation_seed = 0;
    std::uint32_t epoch = 0;
    std::vector<std::string> class_names;
};

inline SpecBlock decode_spec_block(const std::string& text) {
    SpecBlock out;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("checkpoint spec block line " + std::to_string(lineno) + " is not key=value");
        }
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            if (key == "kind") out.spec.kind = model_kind_from_string(val);
            else if (key == "height") out.spec.height = std::stoull(val);
            else if (key == "width") out.spec.width = std::stoull(val);
            else if (key == "channels") out.spec.channels = std::stoull(val);
            else if (key == "num_classes") out.spec.num_classes = std::stoull(val);
            else if (key == "patch") out.spec.patch = std::stoull(val);
            else if (key == "embed_dim") out.spec.embed_dim = std::stoull(val);
            else if (key == "depth") out.spec.depth = std::stoull(val);
            else if (key == "heads") out.spec.heads = std::stoull(val);
            else if (key == "mlp_dim") out.spec.mlp_dim = std::stoull(val);
            else if (key == "stage_channels") out.spec.stage_channels = parse_sizes(val);
            else if (key == "stage_blocks") out.spec.stage_blocks = parse_sizes(val);
            else if (key == "head_hidden") out.spec.head_hidden = std::stoull(val);
            else if (key == "seed") out.spec.seed = std::stoull(val);
            else if (key == "creation_seed") out.creation_seed = std::stoull(val);
            else if (key == "epoch") out.epoch = static_cast<std::uint32_t>(std::stoul(val));
            else if (key == "classes") out.class_names = parse_strings(val);
            else throw FormatError("checkpoint spec block has unknown key: " + key);
        } catch (const std::invalid_argument&) {
            throw FormatError("checkpoint spec block line " + std::to_string(lineno) + " has a malformed value");
        }
    }
    return out;
}

}  // namespace detail

template <typename T>
void save_model(const ModelState<T>& m, const std::string& path) {
    detail::ByteWriter w;
    w.raw(kCheckpointMagic, 4);
    w.u32(kCheckpointVersion);

    const std::string spec_text = encode_spec_block(m);
    w.u32(static_cast<std::uint32_t>(spec_text.size()));
    w.raw(spec_text.data(), spec_text.size());

    w.u32(static_cast<std::uint32_t>(m.params.size()));
    for (const auto& [name, param] : m.params) {
        if (name.size() > 0xffff) throw ContractError("parameter name too long: " + name);
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.raw(name.data(), name.size());
        const Shape& shape = param.value.shape();
        w.u8(static_cast<std::uint8_t>(shape.size()));
        for (std::size_t d : shape) w.u64(d);
        w.u8(static_cast<std::uint8_t>(dtype_tag_of<T>()));
        w.u8(param.trainable ? 1 : 0);
        for (T v : param.value.data()) w.value(v);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw IoError("checkpoint write failed: " + path);
}

namespace detail {

inline std::vector<char> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace detail

// Reads only as far as the first tensor's dtype tag; used to pick the
// element type before a full typed load.
inline DtypeTag checkpoint_dtype(const std::string& path) {
    detail::ByteReader r(detail::read_file_bytes(path));
    const std::string magic = r.str(4);
    if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic at offset 0 (expected XRVT)");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + " at offset 4");
    }
    const std::uint32_t spec_len = r.u32();
    r.str(spec_len);
    const std::uint32_t count = r.u32();
    if (count == 0) throw FormatError("checkpoint holds no tensors");
    const std::uint16_t name_len = r.u16();
    r.str(name_len);
    const std::uint8_t ndim = r.u8();
    for (std::uint8_t d = 0; d < ndim; ++d) r.u64();
    const std::uint8_t tag = r.u8();
    if (tag != 1 && tag != 2) {
        throw FormatError("unknown dtype tag " + std::to_string(tag) + " at offset " + std::to_string(r.offset() - 1));
    }
    return static_cast<DtypeTag>(tag);
}

template <typename T>
ModelState<T> load_model(const std::string& path) {
    detail::ByteReader r(detail::read_file_bytes(path));

    const std::string magic = r.str(4);
    if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic at offset 0 (expected XRVT)");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + " at offset 4");
    }

    const std::uint32_t spec_len = r.u32();
    const detail::SpecBlock block = detail::decode_spec_block(r.str(spec_len));

    ModelState<T> m;
    m.spec = block.spec;
    m.spec.validate();
    m.creation_seed = block.creation_seed;
    m.epoch = block.epoch;
    m.class_names = block.class_names;

    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t entry_offset = r.offset();
        const std::uint16_t name_len = r.u16();
        const std::string name = r.str(name_len);
        const std::uint8_t ndim = r.u8();
        if (ndim == 0 || ndim > 8) {
            throw FormatError("tensor \"" + name + "\" at offset " + std::to_string(entry_offset) +
                              " has implausible rank " + std::to_string(ndim));
        }
        Shape shape;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            const std::uint64_t dim = r.u64();
            if (dim == 0 || dim > (std::uint64_t{1} << 32)) {
                throw FormatError("tensor \"" + name + "\" at offset " + std::to_string(entry_offset) +
                                  " has implausible dimension " + std::to_string(dim));
            }
            shape.push_back(static_cast<std::size_t>(dim));
        }
        const std::uint8_t tag = r.u8();
        if (tag != static_cast<std::uint8_t>(dtype_tag_of<T>())) {
            throw FormatError("tensor \"" + name + "\" at offset " + std::to_string(entry_offset) +
                              " has dtype tag " + std::to_string(tag) + ", expected " +
                              std::to_string(static_cast<int>(dtype_tag_of<T>())));
        }
        const bool trainable = r.u8() != 0;
        std::vector<T> values(shape_numel(shape));
        for (T& v : values) {
            if constexpr (std::is_same_v<T, float>) v = r.f32();
            else v = r.f64();
        }
        m.params.insert(name, Tensor<T>::from_data(shape, std::move(values)), trainable);
    }
    if (!r.at_end()) {
        throw FormatError("checkpoint has " + std::to_string(r.offset()) + " bytes of payload but trailing data follows");
    }

    // The stored tensor set must be exactly what the spec implies.
    std::vector<std::string> names = m.params.names();
    std::sort(names.begin(), names.end());
    if (names != expected_param_names(m.spec)) {
        throw FormatError("checkpoint parameter set does not match its model spec");
    }
    for (const ParamDesc& d : enumerate_params(m.spec)) {
        if (m.params.tensor(d.name).shape() != d.shape) {
            throw FormatError("checkpoint tensor \"" + d.name + "\" has shape " +
                              shape_str(m.params.tensor(d.name).shape()) + ", spec implies " + shape_str(d.shape));
        }
    }
    return m;
}

}  // namespace xrv

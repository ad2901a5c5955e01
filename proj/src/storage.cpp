#include "wquant/storage.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "wquant/errors.hpp"

namespace wquant {

namespace {

constexpr char kTensorMagic[4] = {'W', 'Q', 'T', '1'};
constexpr char kPackedMagic[4] = {'W', 'Q', 'P', '1'};

void put_u64(std::vector<uint8_t>& buf, uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<uint8_t>& buf, double v) {
    put_u64(buf, std::bit_cast<uint64_t>(v));
}

void put_f32(std::vector<uint8_t>& buf, float v) {
    uint32_t u = std::bit_cast<uint32_t>(v);
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>(u >> (8 * i)));
}

struct Cursor {
    const std::vector<uint8_t>& data;
    size_t pos = 0;
    const std::string& name;

    void need(size_t n, const char* what) const {
        if (pos + n > data.size())
            throw io_error(name + ": truncated file while reading " + what);
    }
    uint8_t u8(const char* what) {
        need(1, what);
        return data[pos++];
    }
    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(data[pos++]) << (8 * i);
        return v;
    }
    double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
    float f32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data[pos++]) << (8 * i);
        return std::bit_cast<float>(v);
    }
};

std::vector<uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw io_error("cannot open for reading: " + path.string());
    auto size = in.tellg();
    in.seekg(0);
    std::vector<uint8_t> buf(static_cast<size_t>(size));
    if (size > 0 && !in.read(reinterpret_cast<char*>(buf.data()), size))
        throw io_error("read failed: " + path.string());
    return buf;
}

// Temp file + rename so readers never observe a partial write.
void atomic_write(const std::filesystem::path& path, const std::vector<uint8_t>& buf) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw io_error("cannot open for writing: " + tmp.string());
        if (!buf.empty() &&
            !out.write(reinterpret_cast<const char*>(buf.data()),
                       static_cast<std::streamsize>(buf.size())))
            throw io_error("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw io_error("rename failed: " + path.string() + ": " + ec.message());
}

size_t checked_count(const std::vector<size_t>& dims, const std::string& name) {
    size_t count = 1;
    for (size_t d : dims) {
        if (d == 0) throw io_error(name + ": zero dimension");
        if (count > std::numeric_limits<size_t>::max() / d)
            throw io_error(name + ": dimension overflow");
        count *= d;
    }
    return count;
}

}  // namespace

size_t TensorFile::count() const {
    size_t c = 1;
    for (size_t d : dims) c *= d;
    return dims.empty() ? 0 : c;
}

void write_tensor(const std::filesystem::path& path, const TensorFile& t) {
    if (t.values.size() != t.count()) throw io_error("tensor payload/dims mismatch");
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), kTensorMagic, kTensorMagic + 4);
    buf.push_back(1);  // version
    buf.push_back(static_cast<uint8_t>(t.dtype));
    buf.push_back(static_cast<uint8_t>(t.dims.size()));
    for (size_t d : t.dims) put_u64(buf, d);
    for (double v : t.values) {
        if (t.dtype == Dtype::F32)
            put_f32(buf, static_cast<float>(v));
        else
            put_f64(buf, v);
    }
    atomic_write(path, buf);
}

TensorFile read_tensor(const std::filesystem::path& path) {
    std::vector<uint8_t> buf = slurp(path);
    std::string name = path.string();
    Cursor c{buf, 0, name};
    c.need(4, "magic");
    if (std::memcmp(buf.data(), kTensorMagic, 4) != 0)
        throw io_error(name + ": bad magic (expected WQT1)");
    c.pos = 4;
    if (uint8_t v = c.u8("version"); v != 1)
        throw io_error(name + ": unsupported version " + std::to_string(v));
    uint8_t dt = c.u8("dtype");
    if (dt > 1) throw io_error(name + ": unknown dtype " + std::to_string(dt));
    TensorFile t;
    t.dtype = static_cast<Dtype>(dt);
    uint8_t ndim = c.u8("ndim");
    t.dims.resize(ndim);
    for (auto& d : t.dims) d = static_cast<size_t>(c.u64("dims"));
    size_t count = checked_count(t.dims, name);
    size_t elem = (t.dtype == Dtype::F32) ? 4 : 8;
    if (buf.size() - c.pos != count * elem)
        throw io_error(name + ": payload size mismatch (truncated or trailing bytes)");
    t.values.resize(count);
    for (double& v : t.values)
        v = (t.dtype == Dtype::F32) ? static_cast<double>(c.f32("payload")) : c.f64("payload");
    return t;
}

size_t packed_payload_bytes(size_t count, int bits) {
    return (count * static_cast<size_t>(bits) + 7) / 8;
}

void pack(const QuantizedTensor& q, const std::filesystem::path& path) {
    if (q.bits < 2 || q.bits > 8) throw io_error("packed bit width must lie in [2,8]");
    const int n = 1 << (q.bits - 1);
    if (static_cast<int>(q.codebook.values.size()) != n)
        throw io_error("codebook size does not match bit width");
    std::vector<uint8_t> buf;
    buf.insert(buf.end(), kPackedMagic, kPackedMagic + 4);
    buf.push_back(1);  // version
    buf.push_back(static_cast<uint8_t>(q.bits));
    buf.push_back(static_cast<uint8_t>(q.scheme == Scheme::Linear ? 0 : 1));
    buf.push_back(static_cast<uint8_t>(q.rounding == Rounding::Floor ? 0
                                       : q.rounding == Rounding::Ceil ? 1
                                                                      : 2));
    buf.push_back(static_cast<uint8_t>(q.shape.size()));
    for (size_t d : q.shape) put_u64(buf, d);
    put_f64(buf, q.max_abs);
    put_f64(buf, q.rescale);
    for (double v : q.codebook.values) put_f64(buf, v);

    // B bits per weight, MSB-first: sign bit (1 = negative), then B-1 code bits.
    uint32_t acc = 0;
    int nbits = 0;
    for (size_t i = 0; i < q.codes.size(); ++i) {
        uint32_t rec = (q.signs[i] < 0 ? 1u : 0u) << (q.bits - 1);
        rec |= q.codes[i];
        acc = (acc << q.bits) | rec;
        nbits += q.bits;
        while (nbits >= 8) {
            buf.push_back(static_cast<uint8_t>(acc >> (nbits - 8)));
            nbits -= 8;
        }
    }
    if (nbits > 0) buf.push_back(static_cast<uint8_t>(acc << (8 - nbits)));
    atomic_write(path, buf);
}

QuantizedTensor unpack(const std::filesystem::path& path) {
    std::vector<uint8_t> buf = slurp(path);
    std::string name = path.string();
    Cursor c{buf, 0, name};
    c.need(4, "magic");
    if (std::memcmp(buf.data(), kPackedMagic, 4) != 0)
        throw io_error(name + ": bad magic (expected WQP1)");
    c.pos = 4;
    if (uint8_t v = c.u8("version"); v != 1)
        throw io_error(name + ": unsupported version " + std::to_string(v));
    QuantizedTensor q;
    q.bits = c.u8("bits");
    if (q.bits < 2 || q.bits > 8)
        throw io_error(name + ": bit width " + std::to_string(q.bits) + " outside [2,8]");
    uint8_t sch = c.u8("scheme");
    if (sch > 1) throw io_error(name + ": unknown scheme " + std::to_string(sch));
    q.scheme = sch == 0 ? Scheme::Linear : Scheme::Exponential;
    uint8_t rnd = c.u8("rounding");
    if (rnd > 2) throw io_error(name + ": unknown rounding " + std::to_string(rnd));
    q.rounding = rnd == 0 ? Rounding::Floor : (rnd == 1 ? Rounding::Ceil : Rounding::Mean);
    uint8_t ndim = c.u8("ndim");
    q.shape.resize(ndim);
    for (auto& d : q.shape) d = static_cast<size_t>(c.u64("dims"));
    size_t count = checked_count(q.shape, name);
    q.max_abs = c.f64("M");
    q.rescale = c.f64("rescale");
    const int n = 1 << (q.bits - 1);
    q.codebook.rounding = q.rounding;
    q.codebook.values.resize(n);
    for (double& v : q.codebook.values) v = c.f64("codebook");

    if (buf.size() - c.pos != packed_payload_bytes(count, q.bits))
        throw io_error(name + ": payload size mismatch (truncated or trailing bytes)");
    q.signs.resize(count);
    q.codes.resize(count);
    uint32_t acc = 0;
    int nbits = 0;
    size_t byte = c.pos;
    for (size_t i = 0; i < count; ++i) {
        while (nbits < q.bits) {
            acc = (acc << 8) | buf[byte++];
            nbits += 8;
        }
        uint32_t rec = (acc >> (nbits - q.bits)) & ((1u << q.bits) - 1);
        nbits -= q.bits;
        q.signs[i] = (rec >> (q.bits - 1)) ? -1 : 1;
        uint32_t code = rec & ((1u << (q.bits - 1)) - 1);
        if (code >= static_cast<uint32_t>(n))
            throw io_error(name + ": code out of range");  // unreachable at B>=2
        q.codes[i] = static_cast<uint8_t>(code);
    }
    if (nbits > 0 && (acc & ((1u << nbits) - 1)) != 0)
        throw io_error(name + ": nonzero padding bits");

    // x0 is not part of the format; recover it from the codebook when the
    // rounding rule pins boundary values, else leave it unset.
    if (q.rounding == Rounding::Floor)
        q.x0 = q.codebook.values[1];
    else if (q.rounding == Rounding::Ceil)
        q.x0 = q.codebook.values[0];
    else
        q.x0 = std::numeric_limits<double>::quiet_NaN();
    return q;
}

void write_manifest(const std::filesystem::path& path,
                    const std::vector<ManifestLayer>& layers) {
    nlohmann::json j;
    j["layers"] = nlohmann::json::array();
    for (const ManifestLayer& l : layers) {
        j["layers"].push_back({{"name", l.name},
                               {"file", l.file},
                               {"sigma", l.sigma},
                               {"M", l.max_abs},
                               {"x0", l.x0},
                               {"rho", l.rho},
                               {"bits", l.bits}});
    }
    std::string s = j.dump(2);
    s += '\n';
    atomic_write(path, std::vector<uint8_t>(s.begin(), s.end()));
}

std::vector<ManifestLayer> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open for reading: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error(path.string() + ": " + e.what());
    }
    std::vector<ManifestLayer> out;
    for (const auto& l : j.at("layers")) {
        ManifestLayer m;
        m.name = l.at("name").get<std::string>();
        m.file = l.at("file").get<std::string>();
        m.sigma = l.value("sigma", 0.0);
        m.max_abs = l.value("M", 0.0);
        m.x0 = l.value("x0", 0.0);
        m.rho = l.value("rho", 0.0);
        m.bits = l.value("bits", 0);
        out.push_back(std::move(m));
    }
    return out;
}

}  // namespace wquant

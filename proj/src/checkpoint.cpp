#include "streamal/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace streamal {

namespace {

constexpr char kParamsMagic[8] = {'S', 'A', 'L', 'P', 'V', 'E', 'C', '1'};
constexpr char kBeliefMagic[8] = {'S', 'A', 'L', 'B', 'L', 'F', '1', '\0'};

struct Writer {
    std::vector<unsigned char> bytes;

    template <typename T>
    void put(const T& v) {
        const auto* p = reinterpret_cast<const unsigned char*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void put_magic(const char (&magic)[8]) {
        bytes.insert(bytes.end(), magic, magic + 8);
    }
    void put_doubles(const double* data, std::int64_t n) {
        const auto* p = reinterpret_cast<const unsigned char*>(data);
        bytes.insert(bytes.end(), p, p + static_cast<std::size_t>(n) * sizeof(double));
    }
};

struct Reader {
    const std::vector<unsigned char>& bytes;
    std::size_t pos = 0;

    template <typename T>
    T get() {
        if (pos + sizeof(T) > bytes.size()) throw std::runtime_error("checkpoint: truncated");
        T v;
        std::memcpy(&v, bytes.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    void expect_magic(const char (&magic)[8]) {
        if (pos + 8 > bytes.size() || std::memcmp(bytes.data() + pos, magic, 8) != 0)
            throw std::runtime_error("checkpoint: bad magic");
        pos += 8;
    }
    void get_doubles(double* out, std::int64_t n) {
        const std::size_t sz = static_cast<std::size_t>(n) * sizeof(double);
        if (pos + sz > bytes.size()) throw std::runtime_error("checkpoint: truncated");
        std::memcpy(out, bytes.data() + pos, sz);
        pos += sz;
    }
};

void put_arch(Writer& w, const MLPArch& arch) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(arch.n_weight_layers()));
    for (int s : arch.layer_sizes) w.put<std::uint32_t>(static_cast<std::uint32_t>(s));
}

MLPArch get_arch(Reader& r) {
    const auto layers = r.get<std::uint32_t>();
    if (layers == 0 || layers > 1024) throw std::runtime_error("checkpoint: bad layer count");
    MLPArch arch;
    arch.layer_sizes.resize(layers + 1);
    for (auto& s : arch.layer_sizes) {
        s = static_cast<int>(r.get<std::uint32_t>());
        if (s <= 0) throw std::runtime_error("checkpoint: bad layer size");
    }
    return arch;
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out.good()) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void save_params(const ParamVector& theta, const std::string& path) {
    Writer w;
    w.put_magic(kParamsMagic);
    put_arch(w, theta.arch());
    w.put_doubles(theta.flat().data(), theta.size());
    write_file(path, w.bytes);
}

ParamVector load_params(const std::string& path) {
    const auto bytes = read_file(path);
    Reader r{bytes};
    r.expect_magic(kParamsMagic);
    const MLPArch arch = get_arch(r);
    ParamVector theta(arch);
    r.get_doubles(theta.flat().data(), theta.size());
    return theta;
}

std::vector<unsigned char> serialize_belief(const GaussianBelief& belief) {
    Writer w;
    w.put_magic(kBeliefMagic);
    const MLPArch& arch = belief.mean.arch();
    put_arch(w, arch);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(belief.kind));
    w.put<double>(belief.iso_precision);
    w.put<double>(belief.tau);
    w.put<double>(belief.alpha);
    w.put<double>(belief.beta);
    w.put_doubles(belief.mean.flat().data(), belief.mean.size());
    if (belief.kind == BeliefKind::Kronecker) {
        for (const auto& f : belief.factors) {
            w.put_doubles(f.A.data(), f.A.size());
            w.put_doubles(f.G.data(), f.G.size());
        }
    }
    return w.bytes;
}

GaussianBelief deserialize_belief(const std::vector<unsigned char>& bytes) {
    Reader r{bytes};
    r.expect_magic(kBeliefMagic);
    const MLPArch arch = get_arch(r);
    GaussianBelief b;
    const auto kind = r.get<std::uint8_t>();
    if (kind > 2) throw std::runtime_error("checkpoint: bad belief kind");
    b.kind = static_cast<BeliefKind>(kind);
    b.iso_precision = r.get<double>();
    b.tau = r.get<double>();
    b.alpha = r.get<double>();
    b.beta = r.get<double>();
    b.mean = ParamVector(arch);
    r.get_doubles(b.mean.flat().data(), b.mean.size());
    if (b.kind == BeliefKind::Kronecker) {
        for (int l = 0; l < arch.n_weight_layers(); ++l) {
            KroneckerFactorPair f;
            f.A.resize(arch.fan_in(l) + 1, arch.fan_in(l) + 1);
            f.G.resize(arch.fan_out(l), arch.fan_out(l));
            r.get_doubles(f.A.data(), f.A.size());
            r.get_doubles(f.G.data(), f.G.size());
            b.factors.push_back(std::move(f));
        }
    }
    return b;
}

void save_belief(const GaussianBelief& belief, const std::string& path) {
    write_file(path, serialize_belief(belief));
}

GaussianBelief load_belief(const std::string& path) {
    return deserialize_belief(read_file(path));
}

}  // namespace streamal

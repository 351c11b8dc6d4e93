#include "regscore/bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "regscore/error.hpp"

namespace regscore {

static_assert(std::endian::native == std::endian::little, "bundle I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'R', 'G', 'S', 'C', 'B', 'N', 'D', 'L'};
constexpr std::size_t kHeaderSize = sizeof kMagic + 4 + 8;

class Writer {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const char*>(&v);
        out_.append(p, sizeof v);
    }
    void u8(std::uint8_t v) { put(v); }
    void u32(std::uint32_t v) { put(v); }
    void u64(std::uint64_t v) { put(v); }
    void f64(double v) { put(v); }
    void sizes(const std::vector<std::size_t>& v) {
        u64(v.size());
        for (std::size_t x : v) u64(x);
    }
    void reals(std::span<const double> v) {
        u64(v.size());
        out_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
    }
    std::string& bytes() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, in_.data() + pos_, sizeof v);
        pos_ += sizeof v;
        return v;
    }
    std::uint8_t u8() { return get<std::uint8_t>(); }
    std::uint32_t u32() { return get<std::uint32_t>(); }
    std::uint64_t u64() { return get<std::uint64_t>(); }
    double f64() { return get<double>(); }
    std::vector<std::size_t> sizes() {
        const std::uint64_t n = u64();
        need(n * 8);
        std::vector<std::size_t> v(n);
        for (auto& x : v) x = u64();
        return v;
    }
    std::vector<double> reals() {
        const std::uint64_t n = u64();
        need(n * sizeof(double));
        std::vector<double> v(n);
        std::memcpy(v.data(), in_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
        return v;
    }
    /// Reads a tensor into an existing view of the same size.
    void into(std::span<double> dst, const std::string& what) {
        const std::vector<double> v = reals();
        if (v.size() != dst.size()) {
            throw Error(ErrorCode::CorruptBundle, "tensor " + what + " has " + std::to_string(v.size()) +
                                                      " values, expected " + std::to_string(dst.size()));
        }
        std::copy(v.begin(), v.end(), dst.begin());
    }
    bool done() const { return pos_ == in_.size(); }

private:
    void need(std::uint64_t n) const {
        if (n > in_.size() - pos_) throw Error(ErrorCode::CorruptBundle, "bundle payload ends early");
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::string_view bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

void write_params(Writer& w, const ParamList& params) {
    for (const ParamView& p : params) w.reals(p.values);
}

void read_params(Reader& r, const ParamList& params) {
    for (const ParamView& p : params) r.into(p.values, p.name);
}

std::string encode_payload(const ModelBundle& b) {
    FusionModel m = b.model;  // parameter views need a mutable model
    Writer w;
    w.u8(static_cast<std::uint8_t>(m.mode));
    w.u8(static_cast<std::uint8_t>(m.similarity));
    w.f64(m.threshold);
    w.u8(m.stats.enabled ? 1 : 0);
    for (double v : m.stats.mean) w.f64(v);
    for (double v : m.stats.stddev) w.f64(v);

    const Hyperparams& hp = b.hyperparams;
    w.f64(hp.learning_rate);
    w.f64(hp.adam_beta1);
    w.f64(hp.adam_beta2);
    w.f64(hp.adam_eps);
    w.u64(hp.batch_size);
    w.u64(hp.max_epochs);
    w.u64(hp.early_stop_patience);
    w.u64(hp.seed);
    w.u64(b.best_epoch);

    if (m.uses_mlp()) {
        const MlpConfig& c = m.mlp.config;
        w.u64(c.input_dim);
        w.u64(c.output_dim);
        w.sizes(c.layer_widths);
        w.f64(c.leaky_slope);
        w.reals(c.dropout_ps);
        w.f64(c.bn_epsilon);
        w.u64(c.seed);
        write_params(w, mlp_parameters(m.mlp));
        for (const BatchNormParams& bn : m.mlp.norm) {
            w.reals(bn.running_mean);
            w.reals(bn.running_var);
        }
    }
    if (m.uses_encoder()) {
        const EncoderConfig& c = m.encoder.config;
        w.u64(c.embed_dim);
        w.u64(c.num_layers);
        w.u64(c.num_heads);
        w.u64(c.ffn_dim);
        w.u64(c.max_len);
        w.u64(c.seed);
        write_params(w, encoder_parameters(m.encoder));
    }
    if (m.mode != ModelMode::mlp_only) {
        w.u64(m.head.weight.rows());
        w.reals(m.head.weight.values());
        w.reals(m.head.bias);
    }
    return std::move(w.bytes());
}

ModelBundle decode_payload(std::string_view payload) {
    Reader r(payload);
    ModelBundle b;
    FusionModel& m = b.model;
    const std::uint8_t mode = r.u8();
    const std::uint8_t sim = r.u8();
    if (mode > 2 || sim > 1) throw Error(ErrorCode::CorruptBundle, "unknown model or similarity mode");
    m.mode = static_cast<ModelMode>(mode);
    m.similarity = static_cast<SimilarityMode>(sim);
    m.threshold = r.f64();
    m.stats.enabled = r.u8() != 0;
    for (double& v : m.stats.mean) v = r.f64();
    for (double& v : m.stats.stddev) v = r.f64();

    Hyperparams& hp = b.hyperparams;
    hp.learning_rate = r.f64();
    hp.adam_beta1 = r.f64();
    hp.adam_beta2 = r.f64();
    hp.adam_eps = r.f64();
    hp.batch_size = r.u64();
    hp.max_epochs = r.u64();
    hp.early_stop_patience = r.u64();
    hp.seed = r.u64();
    b.best_epoch = r.u64();

    try {
        if (m.uses_mlp()) {
            MlpConfig c;
            c.input_dim = r.u64();
            c.output_dim = r.u64();
            c.layer_widths = r.sizes();
            c.leaky_slope = r.f64();
            c.dropout_ps = r.reals();
            c.bn_epsilon = r.f64();
            c.seed = r.u64();
            m.mlp = mlp_init(c);
            read_params(r, mlp_parameters(m.mlp));
            for (std::size_t k = 0; k < m.mlp.norm.size(); ++k) {
                BatchNormParams& bn = m.mlp.norm[k];
                r.into(bn.running_mean, "bn" + std::to_string(k) + ".running_mean");
                r.into(bn.running_var, "bn" + std::to_string(k) + ".running_var");
            }
        }
        if (m.uses_encoder()) {
            EncoderConfig c;
            c.embed_dim = r.u64();
            c.num_layers = r.u64();
            c.num_heads = r.u64();
            c.ffn_dim = r.u64();
            c.max_len = r.u64();
            c.seed = r.u64();
            m.encoder = encoder_init(c);
            read_params(r, encoder_parameters(m.encoder));
        }
    } catch (const Error& e) {
        if (e.code() != ErrorCode::InvalidConfig) throw;
        throw Error(ErrorCode::CorruptBundle, std::string("stored configuration rejected: ") + e.what());
    }
    if (m.mode != ModelMode::mlp_only) {
        const std::uint64_t rows = r.u64();
        m.head = FusionHead{Matrix(rows, 2), std::vector<double>(2)};
        r.into(m.head.weight.values(), "head.weight");
        r.into(m.head.bias, "head.bias");
        const std::size_t expected = (m.mode == ModelMode::fused ? m.mlp.config.embedding_dim() : 0) +
                                     m.encoder.config.embed_dim;
        if (rows != expected) throw Error(ErrorCode::CorruptBundle, "head width does not match the branches");
    }
    if (!r.done()) throw Error(ErrorCode::CorruptBundle, "trailing bytes after the model payload");
    return b;
}

}  // namespace

std::string serialize_bundle(const ModelBundle& bundle) {
    const std::string payload = encode_payload(bundle);
    Writer w;
    w.bytes().append(kMagic, sizeof kMagic);
    w.u32(bundle.format_version);
    w.u64(payload.size());
    w.bytes() += payload;
    w.u32(crc_of(w.bytes()));
    return std::move(w.bytes());
}

ModelBundle deserialize_bundle(std::string_view bytes) {
    if (bytes.size() < kHeaderSize + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw Error(ErrorCode::CorruptBundle, "not a model bundle (bad magic or too short)");
    }
    Reader header(bytes.substr(sizeof kMagic, 12));
    const std::uint32_t version = header.u32();
    if (version != kBundleFormatVersion) {
        throw Error(ErrorCode::VersionMismatch, "bundle format_version " + std::to_string(version) +
                                                    ", this build reads " + std::to_string(kBundleFormatVersion));
    }
    const std::uint64_t payload_size = header.u64();
    if (payload_size != bytes.size() - kHeaderSize - 4) {
        throw Error(ErrorCode::CorruptBundle, "bundle size does not match its header (truncated or padded)");
    }
    const std::string_view body = bytes.substr(0, bytes.size() - 4);
    Reader tail(bytes.substr(bytes.size() - 4));
    if (tail.u32() != crc_of(body)) throw Error(ErrorCode::CorruptBundle, "bundle checksum mismatch");
    ModelBundle b = decode_payload(bytes.substr(kHeaderSize, payload_size));
    b.format_version = version;
    return b;
}

void save_model(const ModelBundle& bundle, const std::filesystem::path& path) {
    const std::string bytes = serialize_bundle(bundle);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write model " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out.flush()) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

ModelBundle load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open model " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_bundle(buf.str());
}

}  // namespace regscore

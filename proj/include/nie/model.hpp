#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nie/encoder.hpp"
#include "nie/head.hpp"
#include "nie/labels.hpp"
#include "nie/neighborhood.hpp"
#include "nie/quantize.hpp"
#include "nie/vocab.hpp"

namespace nie {

enum class Baseline { Nie, NoContext, GlobalContext };

inline const char* to_string(Baseline b) {
    switch (b) {
        case Baseline::Nie: return "nie";
        case Baseline::NoContext: return "no_context";
        case Baseline::GlobalContext: return "global_context";
    }
    return "nie";
}

inline Baseline baseline_from_string(const std::string& s) {
    if (s == "nie") return Baseline::Nie;
    if (s == "no_context") return Baseline::NoContext;
    if (s == "global_context") return Baseline::GlobalContext;
    throw std::invalid_argument("unknown baseline: " + s);
}

/// Everything inference needs beyond the weights: context/window settings,
/// feature switch, experiment arm, merge threshold and token budgets.
struct PipelineConfig {
    NeighborhoodSpec neighborhood{ContextMode::Bottom, 4};
    bool use_visual_features = true;
    Baseline baseline = Baseline::Nie;
    double merge_alpha = 0.5;
    std::size_t target_budget = 64;     // target block tokens, excl. CLS
    std::size_t neighbor_budget = 127;  // neighborhood tokens, excl. CLS

    /// Canonical form: no_context and "nie with mode None" are the same arm
    /// and must produce identical model files.
    void canonicalize(std::size_t max_len) {
        if (baseline == Baseline::NoContext) neighborhood = NeighborhoodSpec(ContextMode::None, 0);
        if (baseline == Baseline::Nie && neighborhood.mode == ContextMode::None)
            baseline = Baseline::NoContext;
        if (baseline == Baseline::GlobalContext) neighborhood = NeighborhoodSpec(ContextMode::None, 0);
        target_budget = std::min(target_budget, max_len - 1);
        neighbor_budget = std::min(neighbor_budget, max_len - 1);
    }

    friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// A trained model: encoder weights, feature projection and classifier,
/// vocabulary, label space, and the resolved pipeline settings.
struct ModelBundle {
    EncoderConfig enc_cfg;
    PipelineConfig pipe;
    std::uint64_t seed = 0;
    Vocabulary vocab;
    EntityClassSet classes;
    EncoderParams enc;
    HeadParams head;
    std::uint32_t container_version = 1;  // 1 = float32, 2 = int8 quantized

    template <typename F>
    void visit_tensors(F&& f) {
        enc.visit(f);
        head.visit(f);
    }
    template <typename F>
    void visit_tensors(F&& f) const {
        enc.visit(f);
        head.visit(f);
    }
};

namespace modelio {

constexpr char kMagic[4] = {'N', 'I', 'E', 'M'};
constexpr std::uint32_t kVersionFloat = 1;
constexpr std::uint32_t kVersionQuantized = 2;

inline void put_bytes(std::string& out, const void* p, std::size_t n) {
    out.append(static_cast<const char*>(p), n);
}
inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }
inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_i32(std::string& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }
inline void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
inline void put_string(std::string& out, const std::string& s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() {
        const char* p = take(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
        return v;
    }
    std::uint64_t u64() {
        const char* p = take(8);
        std::uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        std::uint32_t n = u32();
        return std::string(take(n), n);
    }
    const char* take(std::size_t n) {
        if (pos_ + n > bytes_.size()) throw std::runtime_error("model file truncated");
        const char* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    bool exhausted() const { return pos_ == bytes_.size(); }

private:
    std::string bytes_;
    std::size_t pos_ = 0;
};

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

inline std::string serialize_model(const ModelBundle& m, bool quantized) {
    std::string out;
    put_bytes(out, kMagic, 4);
    put_u32(out, quantized ? kVersionQuantized : kVersionFloat);

    put_u32(out, static_cast<std::uint32_t>(m.enc_cfg.d1));
    put_u32(out, static_cast<std::uint32_t>(m.enc_cfg.layers));
    put_u32(out, static_cast<std::uint32_t>(m.enc_cfg.heads));
    put_u32(out, static_cast<std::uint32_t>(m.enc_cfg.max_len));
    put_u32(out, static_cast<std::uint32_t>(m.enc_cfg.d3));
    put_u32(out, static_cast<std::uint32_t>(m.enc_cfg.vocab_size));

    put_u8(out, static_cast<std::uint8_t>(m.pipe.neighborhood.mode));
    put_u32(out, static_cast<std::uint32_t>(m.pipe.neighborhood.n));
    put_u8(out, m.pipe.use_visual_features ? 1 : 0);
    put_u8(out, static_cast<std::uint8_t>(m.pipe.baseline));
    put_f64(out, m.pipe.merge_alpha);
    put_u32(out, static_cast<std::uint32_t>(m.pipe.target_budget));
    put_u32(out, static_cast<std::uint32_t>(m.pipe.neighbor_budget));
    put_u64(out, m.seed);

    put_u32(out, static_cast<std::uint32_t>(m.classes.classes().size()));
    for (const auto& c : m.classes.classes()) put_string(out, c);
    put_u32(out, static_cast<std::uint32_t>(m.vocab.words().size()));
    for (const auto& w : m.vocab.words()) put_string(out, w);

    std::uint32_t tensor_count = 0;
    m.visit_tensors([&tensor_count](const std::string&, const Tensor&) { ++tensor_count; });
    put_u32(out, tensor_count);

    m.visit_tensors([&out, quantized](const std::string& name, const Tensor& t) {
        put_string(out, name);
        put_u8(out, quantized ? 1 : 0);
        put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
        if (quantized) {
            QuantizedTensor qt = quantize_tensor(t);
            put_f64(out, qt.scale);
            put_i32(out, qt.zero_point);
            out.append(reinterpret_cast<const char*>(qt.q.data()), qt.q.size());
        } else {
            for (double v : t.data) put_f32(out, static_cast<float>(v));
        }
    });
    return out;
}

}  // namespace modelio

/// Write the float32 container. Byte-identical for identical training runs.
inline void save_model(const ModelBundle& m, const std::string& path) {
    modelio::write_file(path, modelio::serialize_model(m, false));
}

/// Write the int8 container: every parameter tensor stored quantized.
inline void save_model_quantized(const ModelBundle& m, const std::string& path) {
    modelio::write_file(path, modelio::serialize_model(m, true));
}

inline ModelBundle load_model(const std::string& path) {
    modelio::Reader r(modelio::read_file(path));
    char magic[4];
    std::memcpy(magic, r.take(4), 4);
    if (std::memcmp(magic, modelio::kMagic, 4) != 0)
        throw std::runtime_error("not a NIE model file: " + path);
    std::uint32_t version = r.u32();
    if (version != modelio::kVersionFloat && version != modelio::kVersionQuantized)
        throw std::runtime_error("unsupported model container version " + std::to_string(version));

    ModelBundle m;
    m.container_version = version;
    m.enc_cfg.d1 = r.u32();
    m.enc_cfg.layers = r.u32();
    m.enc_cfg.heads = r.u32();
    m.enc_cfg.max_len = r.u32();
    m.enc_cfg.d3 = r.u32();
    m.enc_cfg.vocab_size = r.u32();
    m.enc_cfg.validate();

    m.pipe.neighborhood.mode = static_cast<ContextMode>(r.u8());
    m.pipe.neighborhood.n = r.u32();
    m.pipe.use_visual_features = r.u8() != 0;
    m.pipe.baseline = static_cast<Baseline>(r.u8());
    m.pipe.merge_alpha = r.f64();
    m.pipe.target_budget = r.u32();
    m.pipe.neighbor_budget = r.u32();
    m.seed = r.u64();

    std::uint32_t class_count = r.u32();
    std::vector<std::string> class_names;
    for (std::uint32_t i = 0; i < class_count; ++i) class_names.push_back(r.str());
    m.classes = EntityClassSet(std::move(class_names));

    std::uint32_t word_count = r.u32();
    std::vector<std::string> words;
    words.reserve(word_count);
    for (std::uint32_t i = 0; i < word_count; ++i) words.push_back(r.str());
    m.vocab = Vocabulary::from_words(std::move(words));
    if (m.vocab.size() != m.enc_cfg.vocab_size)
        throw std::runtime_error("model file vocabulary size mismatch");

    m.enc = EncoderParams::shaped(m.enc_cfg);
    m.head = HeadParams::shaped(m.enc_cfg, m.classes);

    std::uint32_t tensor_count = r.u32();
    std::uint32_t seen = 0;
    const std::uint8_t expected_dtype = version == modelio::kVersionQuantized ? 1 : 0;
    m.visit_tensors([&](const std::string& name, Tensor& t) {
        if (seen++ >= tensor_count) throw std::runtime_error("model file is missing tensors");
        std::string stored_name = r.str();
        if (stored_name != name)
            throw std::runtime_error("model file tensor order mismatch: expected " + name + ", found " +
                                     stored_name);
        std::uint8_t dtype = r.u8();
        if (dtype != expected_dtype) throw std::runtime_error("tensor dtype does not match container scheme");
        std::uint32_t ndim = r.u32();
        std::vector<std::size_t> shape;
        for (std::uint32_t i = 0; i < ndim; ++i) shape.push_back(r.u32());
        if (shape != t.shape) throw std::runtime_error("model file tensor shape mismatch for " + name);
        if (dtype == 0) {
            for (double& v : t.data) {
                v = static_cast<double>(r.f32());
                if (!std::isfinite(v))
                    throw std::runtime_error("model file holds non-finite values in " + name);
            }
        } else {
            QuantizedTensor qt;
            qt.shape = shape;
            qt.scale = r.f64();
            qt.zero_point = r.i32();
            qt.q.resize(t.size());
            const char* p = r.take(t.size());
            std::memcpy(qt.q.data(), p, t.size());
            t = dequantize_tensor(qt);
        }
    });
    if (seen != tensor_count) throw std::runtime_error("model file has extra tensors");
    return m;
}

}  // namespace nie

#pragma once

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "monoforge/lm/adamw.hpp"

namespace monoforge {

namespace detail {

inline void write_u64(std::ostream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

inline uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw Error("checkpoint: truncated file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_f64(std::ostream& out, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    write_u64(out, bits);
}

inline double read_f64(std::istream& in) {
    const uint64_t bits = read_u64(in);
    double d;
    std::memcpy(&d, &bits, 8);
    return d;
}

template <typename S>
void write_tensor(std::ostream& out, const std::string& name, const LmMat<S>& m) {
    write_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u64(out, static_cast<uint64_t>(m.rows()));
    write_u64(out, static_cast<uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            write_f64(out, static_cast<double>(m(r, c)));
        }
    }
}

template <typename S>
void read_tensor(std::istream& in, const std::string& expect_name, LmMat<S>& m) {
    const uint64_t name_len = read_u64(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!in || name != expect_name) {
        throw Error("checkpoint: expected tensor '" + expect_name + "', found '" +
                    name + "'");
    }
    const uint64_t rows = read_u64(in);
    const uint64_t cols = read_u64(in);
    if (rows != static_cast<uint64_t>(m.rows()) ||
        cols != static_cast<uint64_t>(m.cols())) {
        throw Error("checkpoint: tensor '" + name + "' has shape " +
                    std::to_string(rows) + "x" + std::to_string(cols) +
                    ", expected " + std::to_string(m.rows()) + "x" +
                    std::to_string(m.cols()));
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = static_cast<S>(read_f64(in));
        }
    }
}

inline nlohmann::json config_to_json(const TinyLMConfig& c) {
    nlohmann::json j;
    j["vocab_size"] = c.vocab_size;
    j["n_embed"] = c.n_embed;
    j["num_blocks"] = c.num_blocks;
    j["num_heads"] = c.num_heads;
    j["context_len"] = c.context_len;
    j["ffn_scaling"] = c.ffn_scaling;
    j["attn_dropout"] = c.attn_dropout;
    j["ffn_dropout"] = c.ffn_dropout;
    j["residual_dropout"] = c.residual_dropout;
    j["tie_output"] = c.tie_output;
    return j;
}

inline TinyLMConfig config_from_json(const nlohmann::json& j) {
    TinyLMConfig c;
    c.vocab_size = j.at("vocab_size").get<size_t>();
    c.n_embed = j.at("n_embed").get<size_t>();
    c.num_blocks = j.at("num_blocks").get<size_t>();
    c.num_heads = j.at("num_heads").get<size_t>();
    c.context_len = j.at("context_len").get<size_t>();
    c.ffn_scaling = j.at("ffn_scaling").get<size_t>();
    c.attn_dropout = j.at("attn_dropout").get<double>();
    c.ffn_dropout = j.at("ffn_dropout").get<double>();
    c.residual_dropout = j.at("residual_dropout").get<double>();
    c.tie_output = j.at("tie_output").get<bool>();
    return c;
}

}  // namespace detail

// Trained-model container: magic, format version, JSON metadata, then the
// parameter tensors (optionally followed by optimizer moments) as named
// little-endian float64 blocks in the canonical tensor order.
struct CheckpointMeta {
    TinyLMConfig config;
    uint64_t seed = 0;
    uint64_t step = 0;
    uint64_t tokens_seen = 0;
};

inline constexpr char kCheckpointMagic[4] = {'M', 'F', 'L', 'M'};
inline constexpr uint64_t kCheckpointVersion = 1;

template <typename S>
void save_checkpoint(const std::string& path, const TinyLMParams<S>& params,
                     const CheckpointMeta& meta, AdamW<S>* opt = nullptr) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("save_checkpoint: cannot open " + path);
    out.write(kCheckpointMagic, 4);
    detail::write_u64(out, kCheckpointVersion);

    nlohmann::json j;
    j["config"] = detail::config_to_json(meta.config);
    j["seed"] = meta.seed;
    j["step"] = meta.step;
    j["tokens_seen"] = meta.tokens_seen;
    j["optimizer_state"] = opt != nullptr;
    const std::string meta_str = j.dump();
    detail::write_u64(out, meta_str.size());
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

    for_each_tensor(params, [&](const std::string& name, const LmMat<S>& m) {
        detail::write_tensor(out, name, m);
    });
    if (opt) {
        detail::write_u64(out, opt->step_count());
        for_each_tensor(opt->first_moment(), [&](const std::string& name, LmMat<S>& m) {
            detail::write_tensor(out, "m." + name, m);
        });
        for_each_tensor(opt->second_moment(), [&](const std::string& name, LmMat<S>& m) {
            detail::write_tensor(out, "v." + name, m);
        });
    }
    if (!out) throw Error("save_checkpoint: write failed for " + path);
}

template <typename S>
CheckpointMeta load_checkpoint(const std::string& path, TinyLMParams<S>& params,
                               AdamW<S>* opt = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("load_checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw Error("load_checkpoint: bad magic in " + path);
    }
    const uint64_t version = detail::read_u64(in);
    if (version != kCheckpointVersion) {
        throw Error("load_checkpoint: unsupported version " + std::to_string(version));
    }
    const uint64_t meta_len = detail::read_u64(in);
    std::string meta_str(meta_len, '\0');
    in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
    if (!in) throw Error("load_checkpoint: truncated metadata");
    nlohmann::json j = nlohmann::json::parse(meta_str);

    CheckpointMeta meta;
    meta.config = detail::config_from_json(j.at("config"));
    meta.seed = j.at("seed").get<uint64_t>();
    meta.step = j.at("step").get<uint64_t>();
    meta.tokens_seen = j.at("tokens_seen").get<uint64_t>();
    meta.config.validate();

    params = zero_params<S>(meta.config);
    for_each_tensor(params, [&](const std::string& name, LmMat<S>& m) {
        detail::read_tensor(in, name, m);
    });
    const bool has_opt = j.at("optimizer_state").get<bool>();
    if (opt) {
        if (!has_opt) throw Error("load_checkpoint: no optimizer state in " + path);
        opt->set_step_count(detail::read_u64(in));
        for_each_tensor(opt->first_moment(), [&](const std::string& name, LmMat<S>& m) {
            detail::read_tensor(in, "m." + name, m);
        });
        for_each_tensor(opt->second_moment(), [&](const std::string& name, LmMat<S>& m) {
            detail::read_tensor(in, "v." + name, m);
        });
    }
    return meta;
}

}  // namespace monoforge

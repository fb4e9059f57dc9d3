#pragma once

// Desk-scale spherical neural operator: grouped DISCO encoders (one filter
// set per variable, shared across atmospheric levels), conditioned
// ConvNeXt-style processor blocks alternating local and global convolutions
// at a 4:1 ratio, and a decoder that upsamples bilinearly before a grouped
// local convolution. Water channels pass through a smooth non-negative
// clamp. The model predicts the next state directly, not a tendency.
//
// Initialization keeps the uncentered second moment of activations near one:
// MLPs use He fan-in scaling, and every convolution is rescaled once at build
// time so that unit-variance white noise maps to unit-second-moment output
// (measured over four probe batches).

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sphere/convolution.hpp"
#include "sphere/field.hpp"
#include "sphere/grid.hpp"
#include "sphere/noise.hpp"
#include "sphere/resample.hpp"
#include "sphere/rng.hpp"
#include "sphere/sfd.hpp"

namespace sphere {

// Piecewise clamp to [0, inf), continuously differentiable:
// 0 for x <= 0, x^2 for 0 < x <= 1/2, x - 1/4 above.
inline double softclamp(double x) {
    if (x <= 0.0) return 0.0;
    if (x <= 0.5) return x * x;
    return x - 0.25;
}

// Exact Gaussian-CDF GeLU.
inline double gelu(double x) {
    return x * 0.5 * std::erfc(-x / std::sqrt(2.0));
}

struct ModelConfig {
    GridSpec in_grid;
    GridSpec latent_grid;
    GridSpec out_grid;
    std::size_t atmo_levels = 3;
    std::size_t atmo_vars = 2;
    std::size_t surface_channels = 2;
    std::size_t aux_channels = 2;
    std::size_t noise_channels = 2;
    std::size_t embed_group = 16;  // latent width per level and per group
    std::size_t n_local_blocks = 4;
    std::size_t n_global_blocks = 1;
    std::size_t mlp_hidden = 32;
    std::vector<std::size_t> water_channels{1, 3, 5, 7};  // prognostic indices
    double theta_cutoff = 0.0;  // latent-grid cutoff; 0 means 3x latent spacing
    double layer_scale_init = 1e-2;

    std::size_t prognostic_channels() const {
        return atmo_levels * atmo_vars + surface_channels;
    }
    std::size_t cond_channels() const { return aux_channels + noise_channels; }
    std::size_t embed_atmo() const { return embed_group / atmo_vars; }
    std::size_t embed_surf() const { return embed_group / surface_channels; }
    std::size_t embed_cond() const { return embed_group / cond_channels(); }
    std::size_t latent_state_channels() const {
        return atmo_levels * atmo_vars * embed_atmo() + surface_channels * embed_surf();
    }
    std::size_t latent_cond_channels() const { return cond_channels() * embed_cond(); }
    double latent_cutoff() const {
        return theta_cutoff > 0.0
                   ? theta_cutoff
                   : 3.0 * pi / static_cast<double>(latent_grid.nlat);
    }
    double out_cutoff() const { return 3.0 * pi / static_cast<double>(out_grid.nlat); }

    void validate() const {
        if (atmo_vars == 0 || surface_channels == 0 || cond_channels() == 0)
            throw std::invalid_argument("ModelConfig: empty channel group");
        if (embed_group % atmo_vars != 0 || embed_group % surface_channels != 0 ||
            embed_group % cond_channels() != 0)
            throw std::invalid_argument(
                "ModelConfig: embed_group must divide evenly into every group");
        if (n_local_blocks != 4 * n_global_blocks)
            throw std::invalid_argument("ModelConfig: local:global block ratio must be 4:1");
        if (latent_grid.nlat >= in_grid.nlat)
            throw std::invalid_argument("ModelConfig: latent grid must be coarser than input");
        for (std::size_t w : water_channels)
            if (w >= prognostic_channels())
                throw std::invalid_argument("ModelConfig: water channel index out of range");
    }
};

// Desk-scale default: 33x64 equiangular in/out, 16x32 gaussian latent,
// 3 levels x 2 variables plus 2 surface, 2 auxiliary and 2 noise channels.
inline ModelConfig default_model_config() {
    ModelConfig c;
    c.in_grid = build_equiangular(33, 64);
    c.out_grid = c.in_grid;
    c.latent_grid = build_gaussian(16, 32);
    return c;
}

struct BlockWeights {
    bool global = false;
    MixTensor mix;          // local blocks
    SpectralKernel kernel;  // global blocks
    std::vector<double> w1, b1;  // [hidden x C], [hidden]
    std::vector<double> w2, b2;  // [C x hidden], [C]
    std::vector<double> scales;  // [C]
};

struct Model {
    ModelConfig config;
    std::uint64_t seed = 0;

    // assembled operators, derived from the config
    DiscoOperator enc_op;    // in_grid -> latent_grid
    DiscoOperator block_op;  // latent_grid -> latent_grid
    DiscoOperator dec_op;    // out_grid -> out_grid

    std::vector<MixTensor> enc_atmo;  // per variable, shared across levels
    std::vector<MixTensor> enc_surf;  // per surface channel
    std::vector<MixTensor> enc_cond;  // per aux/noise channel
    std::vector<BlockWeights> blocks;
    std::vector<MixTensor> dec_atmo;  // per variable, shared across levels
    std::vector<MixTensor> dec_surf;  // per surface channel
};

inline SphericalField encode(const Model& m, const SphericalField& state);
inline SphericalField encode_conditioning(const Model& m, const SphericalField& aux,
                                          const SphericalField& noise);
inline SphericalField block_apply(const Model& m, std::size_t block_index,
                                  const SphericalField& latent,
                                  const SphericalField& conditioning);
inline SphericalField decode_preclamp(const Model& m, const SphericalField& latent);

namespace detail {

inline SphericalField slice_channels(const SphericalField& f, std::size_t first,
                                     std::size_t count) {
    SphericalField out(f.grid, count);
    std::copy(f.data.begin() + first * f.npoints(),
              f.data.begin() + (first + count) * f.npoints(), out.data.begin());
    return out;
}

inline void paste_channels(SphericalField& dst, const SphericalField& src,
                           std::size_t first) {
    std::copy(src.data.begin(), src.data.end(), dst.data.begin() + first * dst.npoints());
}

inline SphericalField concat_channels(const SphericalField& a, const SphericalField& b) {
    SphericalField out(a.grid, a.channels + b.channels);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.data.size());
    return out;
}

inline double second_moment(const SphericalField& f) {
    double m = 0.0;
    for (double v : f.data) m += v * v;
    return m / static_cast<double>(f.data.size());
}

inline SphericalField white_noise(const GridSpec& g, std::size_t channels, Rng& rng) {
    SphericalField f(g, channels);
    for (auto& v : f.data) v = rng.normal();
    return f;
}

// Rescale a convolution's weights so white noise keeps unit second moment.
template <class Apply>
inline void calibrate_conv(std::vector<double>& weights, const GridSpec& in_grid,
                           std::size_t c_in, Rng& rng, Apply&& apply) {
    double m2 = 0.0;
    for (int probe = 0; probe < 4; ++probe)
        m2 += second_moment(apply(white_noise(in_grid, c_in, rng)));
    m2 /= 4.0;
    if (m2 <= 0.0) throw std::runtime_error("calibrate_conv: degenerate probe response");
    const double s = 1.0 / std::sqrt(m2);
    for (double& w : weights) w *= s;
}

}  // namespace detail

inline Model init_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Model m;
    m.config = config;
    m.seed = seed;
    m.enc_op = assemble_disco(config.in_grid, config.latent_grid,
                              morlet_basis(config.latent_cutoff()));
    m.block_op = assemble_disco(config.latent_grid, config.latent_grid,
                                morlet_basis(config.latent_cutoff()));
    m.dec_op = assemble_disco(config.out_grid, config.out_grid,
                              morlet_basis(config.out_cutoff()));
    const std::size_t K = m.enc_op.n_basis;
    Rng rng(seed);

    auto fresh_mix = [&](std::size_t co, std::size_t ci) {
        MixTensor t(co, ci, K);
        const double s = 1.0 / std::sqrt(static_cast<double>(ci * K));
        for (auto& v : t.w) v = s * rng.normal();
        return t;
    };
    auto calibrated_mix = [&](std::size_t co, std::size_t ci, const DiscoOperator& op) {
        MixTensor t = fresh_mix(co, ci);
        detail::calibrate_conv(t.w, op.in_grid, ci, rng,
                               [&](const SphericalField& f) { return disco_apply(op, f, t); });
        return t;
    };

    for (std::size_t v = 0; v < config.atmo_vars; ++v)
        m.enc_atmo.push_back(calibrated_mix(config.embed_atmo(), 1, m.enc_op));
    for (std::size_t s = 0; s < config.surface_channels; ++s)
        m.enc_surf.push_back(calibrated_mix(config.embed_surf(), 1, m.enc_op));
    for (std::size_t c = 0; c < config.cond_channels(); ++c)
        m.enc_cond.push_back(calibrated_mix(config.embed_cond(), 1, m.enc_op));

    const std::size_t C = config.latent_state_channels();
    const std::size_t Ccat = C + config.latent_cond_channels();
    const std::size_t H = config.mlp_hidden;
    const std::size_t lmax_latent = config.latent_grid.nlat;
    const std::size_t n_blocks = config.n_local_blocks + config.n_global_blocks;
    for (std::size_t b = 0; b < n_blocks; ++b) {
        BlockWeights bw;
        // four local blocks, then one global, repeating
        bw.global = (b % 5 == 4);
        if (bw.global) {
            bw.kernel = SpectralKernel(C, Ccat, lmax_latent);
            const double s = 1.0 / std::sqrt(static_cast<double>(Ccat));
            for (auto& v : bw.kernel.k) v = s * rng.normal();
            detail::calibrate_conv(bw.kernel.k, config.latent_grid, Ccat, rng,
                                   [&](const SphericalField& f) {
                                       return spectral_conv(f, bw.kernel);
                                   });
        } else {
            bw.mix = calibrated_mix(C, Ccat, m.block_op);
        }
        bw.w1.resize(H * C);
        bw.b1.assign(H, 0.0);
        bw.w2.resize(C * H);
        bw.b2.assign(C, 0.0);
        const double s1 = std::sqrt(2.0 / static_cast<double>(C));
        const double s2 = std::sqrt(2.0 / static_cast<double>(H));
        for (auto& v : bw.w1) v = s1 * rng.normal();
        for (auto& v : bw.w2) v = s2 * rng.normal();
        bw.scales.assign(C, config.layer_scale_init);
        m.blocks.push_back(std::move(bw));
    }

    for (std::size_t v = 0; v < config.atmo_vars; ++v)
        m.dec_atmo.push_back(calibrated_mix(1, config.embed_atmo(), m.dec_op));
    for (std::size_t s = 0; s < config.surface_channels; ++s)
        m.dec_surf.push_back(calibrated_mix(1, config.embed_surf(), m.dec_op));

    // Closed-loop gain normalization. Per-layer calibration fixes the gain on
    // white noise, but the composed step amplifies its dominant smooth mode
    // and an autoregressive rollout would overflow. A short power iteration
    // estimates that gain; the decoder is rescaled so the step map is
    // slightly contractive.
    {
        SphericalField state = detail::white_noise(config.in_grid,
                                                   config.prognostic_channels(), rng);
        const SphericalField aux =
            detail::white_noise(config.in_grid, config.aux_channels, rng);
        const SphericalField z =
            detail::white_noise(config.in_grid, config.noise_channels, rng);
        const SphericalField cond = encode_conditioning(m, aux, z);
        const double m2_0 = detail::second_moment(state);
        const int steps = 8;
        for (int it = 0; it < steps; ++it) {
            SphericalField latent = encode(m, state);
            for (std::size_t b = 0; b < m.blocks.size(); ++b)
                latent = block_apply(m, b, latent, cond);
            state = decode_preclamp(m, latent);
        }
        const double gain = std::pow(detail::second_moment(state) / m2_0,
                                     0.5 / static_cast<double>(steps));
        const double s = 0.9 / gain;
        for (auto& t : m.dec_atmo)
            for (double& w : t.w) w *= s;
        for (auto& t : m.dec_surf)
            for (double& w : t.w) w *= s;
    }
    return m;
}

// Grouped encoder: every (level, variable) channel is encoded separately by
// its variable's filters; no channel mixing across groups.
inline SphericalField encode(const Model& m, const SphericalField& state) {
    const ModelConfig& c = m.config;
    require_same_sampling(state, c.in_grid, "encode");
    if (state.channels != c.prognostic_channels())
        throw std::invalid_argument("encode: expected the prognostic channel set");
    SphericalField latent(c.latent_grid, c.latent_state_channels());
    std::size_t slot = 0;
    for (std::size_t l = 0; l < c.atmo_levels; ++l)
        for (std::size_t v = 0; v < c.atmo_vars; ++v) {
            const SphericalField ch = detail::slice_channels(state, l * c.atmo_vars + v, 1);
            detail::paste_channels(latent, disco_apply(m.enc_op, ch, m.enc_atmo[v]), slot);
            slot += c.embed_atmo();
        }
    for (std::size_t s = 0; s < c.surface_channels; ++s) {
        const SphericalField ch =
            detail::slice_channels(state, c.atmo_levels * c.atmo_vars + s, 1);
        detail::paste_channels(latent, disco_apply(m.enc_op, ch, m.enc_surf[s]), slot);
        slot += c.embed_surf();
    }
    return latent;
}

inline SphericalField encode_conditioning(const Model& m, const SphericalField& aux,
                                          const SphericalField& noise) {
    const ModelConfig& c = m.config;
    require_same_sampling(aux, c.in_grid, "encode_conditioning");
    require_same_sampling(noise, c.in_grid, "encode_conditioning");
    if (aux.channels != c.aux_channels || noise.channels != c.noise_channels)
        throw std::invalid_argument("encode_conditioning: channel count mismatch");
    const SphericalField cat = detail::concat_channels(aux, noise);
    SphericalField latent(c.latent_grid, c.latent_cond_channels());
    std::size_t slot = 0;
    for (std::size_t ch = 0; ch < c.cond_channels(); ++ch) {
        const SphericalField one = detail::slice_channels(cat, ch, 1);
        detail::paste_channels(latent, disco_apply(m.enc_op, one, m.enc_cond[ch]), slot);
        slot += c.embed_cond();
    }
    return latent;
}

// y = x + scales .* MLP(GeLU(conv(concat(x, conditioning))))
inline SphericalField block_apply(const Model& m, std::size_t block_index,
                                  const SphericalField& latent,
                                  const SphericalField& conditioning) {
    if (block_index >= m.blocks.size())
        throw std::invalid_argument("block_apply: block index out of range");
    const ModelConfig& c = m.config;
    require_same_sampling(latent, c.latent_grid, "block_apply");
    require_same_sampling(conditioning, c.latent_grid, "block_apply");
    const BlockWeights& bw = m.blocks[block_index];

    const SphericalField cat = detail::concat_channels(latent, conditioning);
    SphericalField conv = bw.global ? spectral_conv(cat, bw.kernel)
                                    : disco_apply(m.block_op, cat, bw.mix);

    const std::size_t C = c.latent_state_channels();
    const std::size_t H = c.mlp_hidden;
    const std::size_t npts = conv.npoints();
    SphericalField out = latent;
    std::vector<double> g(C), h(H);
    for (std::size_t p = 0; p < npts; ++p) {
        for (std::size_t ch = 0; ch < C; ++ch) g[ch] = gelu(conv.data[ch * npts + p]);
        for (std::size_t i = 0; i < H; ++i) {
            double acc = bw.b1[i];
            for (std::size_t ch = 0; ch < C; ++ch) acc += bw.w1[i * C + ch] * g[ch];
            h[i] = gelu(acc);
        }
        for (std::size_t ch = 0; ch < C; ++ch) {
            double acc = bw.b2[ch];
            for (std::size_t i = 0; i < H; ++i) acc += bw.w2[ch * H + i] * h[i];
            out.data[ch * npts + p] += bw.scales[ch] * acc;
        }
    }
    return out;
}

// Bilinear upsampling to the output grid followed by the grouped local
// convolution; the water clamp is applied by decode() on top of this.
inline SphericalField decode_preclamp(const Model& m, const SphericalField& latent) {
    const ModelConfig& c = m.config;
    require_same_sampling(latent, c.latent_grid, "decode");
    const SphericalField up = bilinear_resample(latent, c.out_grid);
    SphericalField out(c.out_grid, c.prognostic_channels());
    std::size_t slot = 0;
    for (std::size_t l = 0; l < c.atmo_levels; ++l)
        for (std::size_t v = 0; v < c.atmo_vars; ++v) {
            const SphericalField grp = detail::slice_channels(up, slot, c.embed_atmo());
            detail::paste_channels(out, disco_apply(m.dec_op, grp, m.dec_atmo[v]),
                                   l * c.atmo_vars + v);
            slot += c.embed_atmo();
        }
    for (std::size_t s = 0; s < c.surface_channels; ++s) {
        const SphericalField grp = detail::slice_channels(up, slot, c.embed_surf());
        detail::paste_channels(out, disco_apply(m.dec_op, grp, m.dec_surf[s]),
                               c.atmo_levels * c.atmo_vars + s);
        slot += c.embed_surf();
    }
    return out;
}

// Full decoder: upsample, grouped convolution, then the non-negativity clamp
// on the water channels.
inline SphericalField decode(const Model& m, const SphericalField& latent) {
    SphericalField out = decode_preclamp(m, latent);
    for (std::size_t w : m.config.water_channels)
        for (std::size_t k = 0; k < out.npoints(); ++k)
            out.data[w * out.npoints() + k] = softclamp(out.data[w * out.npoints() + k]);
    return out;
}

// Full step: u_{n+1} = decode(blocks(encode(u_n), encode(aux, z_n))).
inline SphericalField forward(const Model& m, const SphericalField& state,
                              const SphericalField& aux, const SphericalField& noise) {
    SphericalField latent = encode(m, state);
    const SphericalField cond = encode_conditioning(m, aux, noise);
    for (std::size_t b = 0; b < m.blocks.size(); ++b)
        latent = block_apply(m, b, latent, cond);
    return decode(m, latent);
}

// Autoregressive rollout; the auxiliary provider returns the conditioning for
// each step or nullopt when exhausted, and the noise stream advances its
// diffusion processes once per step.
inline std::vector<SphericalField> rollout(
    const Model& m, const SphericalField& initial,
    const std::function<std::optional<SphericalField>(std::size_t)>& aux_provider,
    NoiseStream& noise_stream, std::size_t n_steps) {
    if (n_steps == 0) throw std::invalid_argument("rollout: need at least one step");
    if (!m.config.out_grid.same_sampling(m.config.in_grid))
        throw std::invalid_argument("rollout: output grid must match the input grid");
    std::vector<SphericalField> states;
    SphericalField u = initial;
    for (std::size_t n = 0; n < n_steps; ++n) {
        const std::optional<SphericalField> aux = aux_provider(n);
        if (!aux) throw std::runtime_error("rollout: auxiliary provider exhausted");
        const SphericalField z = noise_stream.step();
        u = forward(m, u, *aux, z);
        states.push_back(u);
    }
    return states;
}

// --- weight (de)serialization ------------------------------------------------

namespace detail {

inline nlohmann::json grid_meta(const GridSpec& g) {
    return {{"kind", to_string(g.kind)}, {"nlat", g.nlat}, {"nlon", g.nlon}};
}

inline GridSpec grid_from_meta(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const std::size_t nlat = j.at("nlat").get<std::size_t>();
    const std::size_t nlon = j.at("nlon").get<std::size_t>();
    return kind == "gaussian" ? build_gaussian(nlat, nlon) : build_equiangular(nlat, nlon);
}

}  // namespace detail

inline void save_model(const std::string& path, const Model& m) {
    std::vector<NamedTensor> ts;
    auto push = [&](const std::string& name, std::vector<std::size_t> shape,
                    const std::vector<double>& data) {
        ts.push_back(NamedTensor{name, std::move(shape), data});
    };
    auto push_mix = [&](const std::string& name, const MixTensor& t) {
        push(name, {t.c_out, t.c_in, t.k}, t.w);
    };
    for (std::size_t v = 0; v < m.enc_atmo.size(); ++v)
        push_mix("enc.atmo." + std::to_string(v), m.enc_atmo[v]);
    for (std::size_t s = 0; s < m.enc_surf.size(); ++s)
        push_mix("enc.surf." + std::to_string(s), m.enc_surf[s]);
    for (std::size_t c = 0; c < m.enc_cond.size(); ++c)
        push_mix("enc.cond." + std::to_string(c), m.enc_cond[c]);
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        const BlockWeights& bw = m.blocks[b];
        const std::string p = "block." + std::to_string(b) + ".";
        if (bw.global)
            push(p + "kernel", {bw.kernel.c_out, bw.kernel.c_in, bw.kernel.lmax}, bw.kernel.k);
        else
            push_mix(p + "mix", bw.mix);
        push(p + "mlp.w1", {m.config.mlp_hidden, m.config.latent_state_channels()}, bw.w1);
        push(p + "mlp.b1", {m.config.mlp_hidden}, bw.b1);
        push(p + "mlp.w2", {m.config.latent_state_channels(), m.config.mlp_hidden}, bw.w2);
        push(p + "mlp.b2", {m.config.latent_state_channels()}, bw.b2);
        push(p + "scales", {m.config.latent_state_channels()}, bw.scales);
    }
    for (std::size_t v = 0; v < m.dec_atmo.size(); ++v)
        push_mix("dec.atmo." + std::to_string(v), m.dec_atmo[v]);
    for (std::size_t s = 0; s < m.dec_surf.size(); ++s)
        push_mix("dec.surf." + std::to_string(s), m.dec_surf[s]);

    const ModelConfig& c = m.config;
    nlohmann::json meta{{"in_grid", detail::grid_meta(c.in_grid)},
                        {"latent_grid", detail::grid_meta(c.latent_grid)},
                        {"out_grid", detail::grid_meta(c.out_grid)},
                        {"atmo_levels", c.atmo_levels},
                        {"atmo_vars", c.atmo_vars},
                        {"surface_channels", c.surface_channels},
                        {"aux_channels", c.aux_channels},
                        {"noise_channels", c.noise_channels},
                        {"embed_group", c.embed_group},
                        {"n_local_blocks", c.n_local_blocks},
                        {"n_global_blocks", c.n_global_blocks},
                        {"mlp_hidden", c.mlp_hidden},
                        {"water_channels", c.water_channels},
                        {"theta_cutoff", c.theta_cutoff},
                        {"layer_scale_init", c.layer_scale_init},
                        {"seed", m.seed}};
    write_weights(path, ts, meta);
}

inline Model load_model(const std::string& path) {
    const WeightsContents wc = read_weights(path);
    const nlohmann::json& meta = wc.meta;
    ModelConfig c;
    c.in_grid = detail::grid_from_meta(meta.at("in_grid"));
    c.latent_grid = detail::grid_from_meta(meta.at("latent_grid"));
    c.out_grid = detail::grid_from_meta(meta.at("out_grid"));
    c.atmo_levels = meta.at("atmo_levels").get<std::size_t>();
    c.atmo_vars = meta.at("atmo_vars").get<std::size_t>();
    c.surface_channels = meta.at("surface_channels").get<std::size_t>();
    c.aux_channels = meta.at("aux_channels").get<std::size_t>();
    c.noise_channels = meta.at("noise_channels").get<std::size_t>();
    c.embed_group = meta.at("embed_group").get<std::size_t>();
    c.n_local_blocks = meta.at("n_local_blocks").get<std::size_t>();
    c.n_global_blocks = meta.at("n_global_blocks").get<std::size_t>();
    c.mlp_hidden = meta.at("mlp_hidden").get<std::size_t>();
    c.water_channels = meta.at("water_channels").get<std::vector<std::size_t>>();
    c.theta_cutoff = meta.at("theta_cutoff").get<double>();
    c.layer_scale_init = meta.at("layer_scale_init").get<double>();

    Model m = init_model(c, meta.at("seed").get<std::uint64_t>());
    auto find = [&](const std::string& name) -> const NamedTensor& {
        for (const NamedTensor& t : wc.tensors)
            if (t.name == name) return t;
        throw IoError(IoErrorCode::header_mismatch, "missing tensor " + name);
    };
    auto load_mix = [&](const std::string& name, MixTensor& t) {
        const NamedTensor& nt = find(name);
        if (nt.data.size() != t.w.size())
            throw IoError(IoErrorCode::header_mismatch, "tensor size mismatch: " + name);
        t.w = nt.data;
    };
    for (std::size_t v = 0; v < m.enc_atmo.size(); ++v)
        load_mix("enc.atmo." + std::to_string(v), m.enc_atmo[v]);
    for (std::size_t s = 0; s < m.enc_surf.size(); ++s)
        load_mix("enc.surf." + std::to_string(s), m.enc_surf[s]);
    for (std::size_t ch = 0; ch < m.enc_cond.size(); ++ch)
        load_mix("enc.cond." + std::to_string(ch), m.enc_cond[ch]);
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
        BlockWeights& bw = m.blocks[b];
        const std::string p = "block." + std::to_string(b) + ".";
        if (bw.global)
            bw.kernel.k = find(p + "kernel").data;
        else
            load_mix(p + "mix", bw.mix);
        bw.w1 = find(p + "mlp.w1").data;
        bw.b1 = find(p + "mlp.b1").data;
        bw.w2 = find(p + "mlp.w2").data;
        bw.b2 = find(p + "mlp.b2").data;
        bw.scales = find(p + "scales").data;
    }
    for (std::size_t v = 0; v < m.dec_atmo.size(); ++v)
        load_mix("dec.atmo." + std::to_string(v), m.dec_atmo[v]);
    for (std::size_t s = 0; s < m.dec_surf.size(); ++s)
        load_mix("dec.surf." + std::to_string(s), m.dec_surf[s]);
    return m;
}

}  // namespace sphere

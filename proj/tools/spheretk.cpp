// spheretk: batch command-line interface for spherical fields and scores.
//
// Subcommands:
//   score      ensemble/deterministic verification metrics to CSV
//   spectra    angular or zonal power spectral densities to CSV
//   noise      spherical diffusion-process sample sequences to SFD files
//   distcheck  serial vs. simulated-distributed equivalence with traffic CSV
//
// Exit codes: 0 success, 2 usage error, 3 data error, 4 verification failure.

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sphere/distsim.hpp"
#include "sphere/loss.hpp"
#include "sphere/metrics.hpp"
#include "sphere/noise.hpp"
#include "sphere/resample.hpp"
#include "sphere/sfd.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitVerification = 4;

// full float64 round-trip formatting
std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

sphere::CrpsVariant parse_variant(const std::string& v) {
    if (v == "cdf") return sphere::CrpsVariant::cdf;
    if (v == "spread_skill") return sphere::CrpsVariant::spread_skill;
    if (v == "fair") return sphere::CrpsVariant::fair;
    throw CLI::ValidationError("--variant", "unknown variant '" + v + "'");
}

struct ScoreArgs {
    std::vector<std::string> forecast;
    std::string obs;
    std::string climatology;
    std::string metric = "rmse";
    std::string variant = "fair";
    std::string out;
    std::uint64_t seed = 0;
};

int run_score(const ScoreArgs& args) {
    using namespace sphere;
    std::vector<SfdContents> members;
    for (const std::string& path : args.forecast) members.push_back(read_sfd(path));
    const SfdContents obs = read_sfd(args.obs);
    for (const SfdContents& m : members) {
        if (!m.field.grid.same_sampling(obs.field.grid) ||
            m.field.channels != obs.field.channels) {
            std::cerr << "spheretk: forecast/observation grid mismatch\n";
            return kExitData;
        }
    }
    const GridSpec& grid = obs.field.grid;
    const std::size_t C = obs.field.channels;

    EnsembleField ens(grid, members.size(), C);
    for (std::size_t e = 0; e < members.size(); ++e)
        std::copy(members[e].field.data.begin(), members[e].field.data.end(),
                  ens.values.begin() + e * members[e].field.data.size());

    std::ofstream csv(args.out, std::ios::trunc);
    if (!csv) {
        std::cerr << "spheretk: cannot open " << args.out << "\n";
        return kExitData;
    }
    csv << "channel,metric,value\n";
    auto emit = [&](std::size_t c, const std::string& metric, double value) {
        csv << obs.channel_names[c] << "," << metric << "," << num(value) << "\n";
    };

    if (args.metric == "rmse" || args.metric == "mae") {
        const SphericalField mean = ensemble_mean(ens);
        const auto v = lp_error(mean, obs.field, grid, args.metric == "rmse" ? 2 : 1);
        for (std::size_t c = 0; c < C; ++c) emit(c, args.metric, v[c]);
    } else if (args.metric == "acc") {
        if (args.climatology.empty()) {
            std::cerr << "spheretk: --metric acc requires --climatology\n";
            return kExitUsage;
        }
        const SfdContents clim = read_sfd(args.climatology);
        const SphericalField mean = ensemble_mean(ens);
        const auto v = acc(mean, obs.field, clim.field, grid);
        for (std::size_t c = 0; c < C; ++c) {
            if (!v[c]) {
                std::cerr << "spheretk: ACC undefined for channel " << c
                          << " (zero anomaly variance)\n";
                return kExitVerification;
            }
            emit(c, "acc", *v[c]);
        }
    } else if (args.metric == "crps") {
        const auto v = crps_field(ens, obs.field, grid, parse_variant(args.variant));
        for (std::size_t c = 0; c < C; ++c) emit(c, "crps", v[c]);
    } else if (args.metric == "ssr") {
        const auto v = ssr(ens, obs.field, grid);
        for (std::size_t c = 0; c < C; ++c) {
            if (!v[c]) {
                std::cerr << "spheretk: SSR undefined for channel " << c << " (zero skill)\n";
                return kExitVerification;
            }
            emit(c, "ssr", *v[c]);
        }
    } else if (args.metric == "rankhist") {
        Rng rng(args.seed);
        const auto hists = rank_histogram(ens, obs.field, grid, rng);
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t b = 0; b < hists[c].counts.size(); ++b) {
                char label[32];
                std::snprintf(label, sizeof(label), "rankhist_%02zu", b);
                emit(c, label, hists[c].counts[b] / hists[c].total_weight);
            }
    } else {
        std::cerr << "spheretk: unknown metric '" << args.metric << "'\n";
        return kExitUsage;
    }
    return kExitOk;
}

struct SpectraArgs {
    std::string input;
    std::string kind = "angular";
    int lat_index = -1;
    std::string out;
};

int run_spectra(const SpectraArgs& args) {
    using namespace sphere;
    const SfdContents in = read_sfd(args.input);
    std::ofstream csv(args.out, std::ios::trunc);
    if (!csv) {
        std::cerr << "spheretk: cannot open " << args.out << "\n";
        return kExitData;
    }
    if (args.kind == "angular") {
        SphericalField f = in.field;
        if (f.grid.kind != GridKind::gaussian) {
            // resample equiangular inputs onto a gaussian grid of the same size
            f = spectral_resample(f, build_gaussian(f.grid.nlat, f.grid.nlon));
        }
        const auto psd = angular_psd(f);
        csv << "l";
        for (const std::string& name : in.channel_names) csv << "," << name;
        csv << "\n";
        for (std::size_t l = 0; l < psd[0].size(); ++l) {
            csv << l;
            for (std::size_t c = 0; c < psd.size(); ++c) csv << "," << num(psd[c][l]);
            csv << "\n";
        }
    } else if (args.kind == "zonal") {
        if (args.lat_index < 0) {
            std::cerr << "spheretk: --kind zonal requires --lat-index\n";
            return kExitUsage;
        }
        if (static_cast<std::size_t>(args.lat_index) >= in.field.grid.nlat) {
            std::cerr << "spheretk: --lat-index out of range\n";
            return kExitData;
        }
        const auto psd = zonal_psd(in.field, static_cast<std::size_t>(args.lat_index));
        csv << "m";
        for (const std::string& name : in.channel_names) csv << "," << name;
        csv << "\n";
        for (std::size_t m = 0; m < psd[0].size(); ++m) {
            csv << m;
            for (std::size_t c = 0; c < psd.size(); ++c) csv << "," << num(psd[c][m]);
            csv << "\n";
        }
    } else {
        std::cerr << "spheretk: unknown spectra kind '" << args.kind << "'\n";
        return kExitUsage;
    }
    return kExitOk;
}

struct NoiseArgs {
    double kt = 1.97e-3;
    double lambda = 1.0;
    double sigma = 1.0;
    std::size_t lmax = 32;
    std::size_t steps = 1;
    std::uint64_t seed = 0;
    std::string out;  // prefix; files <prefix>_NNNN.sfd
};

int run_noise(const NoiseArgs& args) {
    using namespace sphere;
    const DiffusionParams params = diffusion_params(args.sigma, args.lambda, args.kt,
                                                    args.lmax);
    const GridSpec grid = build_gaussian(args.lmax, 2 * args.lmax);
    NoiseStream stream({params}, grid, args.seed);
    for (std::size_t n = 0; n < args.steps; ++n) {
        const SphericalField f = stream.step();
        char name[32];
        std::snprintf(name, sizeof(name), "_%04zu.sfd", n);
        write_sfd(args.out + name, f, {"noise"});
    }
    return kExitOk;
}

struct DistcheckArgs {
    std::string op = "sht";
    std::string decomp = "2x2";
    std::size_t ensemble = 1;
};

int run_distcheck(const DistcheckArgs& args) {
    using namespace sphere;
    std::size_t nh = 0, nw = 0;
    if (std::sscanf(args.decomp.c_str(), "%zux%zu", &nh, &nw) != 2 || nh == 0 || nw == 0) {
        std::cerr << "spheretk: --decomp must look like 2x4\n";
        return kExitUsage;
    }

    const GridSpec grid = build_gaussian(16, 32);
    const std::size_t C = 3;
    std::mt19937_64 gen(12345);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double gap = 0.0;
    DistContext ctx{CommGrid(1, args.ensemble, nh, nw), {}};

    if (args.op == "sht") {
        SphericalField f(grid, C);
        for (auto& v : f.data) v = u(gen);
        const SpectralCoeffs serial = sht_forward(f, grid.nlat, grid.nlat);
        std::vector<NdArray<double>> problems(
            args.ensemble, NdArray<double>({C, grid.nlat, grid.nlon}, f.data));
        auto views = shard(ctx, problems, {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
        auto out = dist_sht_forward(ctx, views, grid, grid.nlat, grid.nlat);
        for (std::size_t e = 0; e < args.ensemble; ++e) {
            const auto gathered =
                unshard(ctx, out, {{1, CommAxis::polar}, {2, CommAxis::azimuth}}, 0, e);
            for (std::size_t k = 0; k < serial.coeffs.size(); ++k)
                gap = std::max(gap, std::abs(gathered.data[k] - serial.coeffs[k]));
        }
    } else if (args.op == "disco") {
        const FilterBasis basis = morlet_basis(3.0 * pi / grid.nlat);
        const DiscoOperator op = assemble_disco(grid, grid, basis);
        MixTensor mix(2, C, basis.n_real());
        for (auto& v : mix.w) v = u(gen);
        SphericalField f(grid, C);
        for (auto& v : f.data) v = u(gen);
        const SphericalField serial = disco_apply(op, f, mix);
        std::vector<NdArray<double>> problems(
            args.ensemble, NdArray<double>({C, grid.nlat, grid.nlon}, f.data));
        auto views = shard(ctx, problems, {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
        auto out = dist_disco_apply(ctx, views, op, mix);
        for (std::size_t e = 0; e < args.ensemble; ++e) {
            const auto gathered =
                unshard(ctx, out, {{1, CommAxis::polar}, {2, CommAxis::azimuth}}, 0, e);
            for (std::size_t k = 0; k < serial.data.size(); ++k)
                gap = std::max(gap, std::abs(gathered.data[k] - serial.data[k]));
        }
    } else if (args.op == "crps") {
        const std::size_t E = std::max<std::size_t>(2 * args.ensemble, 2);
        EnsembleField ens(grid, E, C);
        for (auto& v : ens.values) v = u(gen);
        SphericalField obs(grid, C);
        for (auto& v : obs.data) v = u(gen);
        const std::vector<double> serial = crps_field(ens, obs, grid, CrpsVariant::fair);
        std::vector<NdArray<double>> fproblems(
            args.ensemble, NdArray<double>({E, C, grid.nlat, grid.nlon}, ens.values));
        std::vector<NdArray<double>> oproblems(
            args.ensemble, NdArray<double>({C, grid.nlat, grid.nlon}, obs.data));
        auto fviews = shard(ctx, fproblems,
                            {{0, CommAxis::ensemble},
                             {2, CommAxis::polar},
                             {3, CommAxis::azimuth}});
        auto oviews = shard(ctx, oproblems, {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
        const auto scores = dist_crps(ctx, fviews, oviews, grid, CrpsVariant::fair);
        for (std::size_t c = 0; c < C; ++c)
            gap = std::max(gap, std::abs(scores[0][c] - serial[c]));
    } else {
        std::cerr << "spheretk: unknown op '" << args.op << "'\n";
        return kExitUsage;
    }

    std::cout << ctx.log.csv();
    std::cout << "max_abs_gap," << num(gap) << "\n";
    if (gap > 1e-12) {
        std::cerr << "spheretk: serial/distributed mismatch " << num(gap) << "\n";
        return kExitVerification;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spherical signal-processing and forecast-verification toolkit"};
    app.require_subcommand(1);

    ScoreArgs score;
    CLI::App* cscore = app.add_subcommand("score", "verification metrics to CSV");
    cscore->add_option("--forecast", score.forecast, "forecast SFD files (ensemble members)")
        ->required()
        ->expected(-1);
    cscore->add_option("--obs", score.obs, "observation SFD file")->required();
    cscore->add_option("--climatology", score.climatology, "climatology SFD (for acc)");
    cscore->add_option("--metric", score.metric, "rmse|mae|acc|crps|ssr|rankhist");
    cscore->add_option("--variant", score.variant, "cdf|spread_skill|fair");
    cscore->add_option("--seed", score.seed, "tie-breaking seed for rankhist");
    cscore->add_option("--out", score.out, "output CSV path")->required();

    SpectraArgs spectra;
    CLI::App* cspectra = app.add_subcommand("spectra", "power spectral densities to CSV");
    cspectra->add_option("--input", spectra.input, "input SFD file")->required();
    cspectra->add_option("--kind", spectra.kind, "angular|zonal");
    cspectra->add_option("--lat-index", spectra.lat_index, "latitude row for zonal spectra");
    cspectra->add_option("--out", spectra.out, "output CSV path")->required();

    NoiseArgs noise;
    CLI::App* cnoise = app.add_subcommand("noise", "diffusion-process noise samples");
    cnoise->add_option("--kt", noise.kt, "spatial scale k_T");
    cnoise->add_option("--lambda", noise.lambda, "temporal rate lambda");
    cnoise->add_option("--sigma", noise.sigma, "process amplitude sigma");
    cnoise->add_option("--lmax", noise.lmax, "spectral truncation");
    cnoise->add_option("--steps", noise.steps, "number of steps to emit");
    cnoise->add_option("--seed", noise.seed, "64-bit generator seed");
    cnoise->add_option("--out", noise.out, "output file prefix")->required();

    DistcheckArgs dist;
    CLI::App* cdist = app.add_subcommand("distcheck",
                                         "serial vs distributed equivalence check");
    cdist->add_option("--op", dist.op, "sht|disco|crps");
    cdist->add_option("--decomp", dist.decomp, "polar x azimuth ranks, e.g. 2x4");
    cdist->add_option("--ensemble", dist.ensemble, "ensemble communicator size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints help or the parse error
        return e.get_exit_code() == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (cscore->parsed()) return run_score(score);
        if (cspectra->parsed()) return run_spectra(spectra);
        if (cnoise->parsed()) return run_noise(noise);
        if (cdist->parsed()) return run_distcheck(dist);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "spheretk: " << e.what() << "\n";
        return kExitUsage;
    } catch (const sphere::IoError& e) {
        std::cerr << "spheretk: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "spheretk: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

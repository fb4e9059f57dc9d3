#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "sphere/distsim.hpp"

using namespace sphere;

TEST_SUITE_BEGIN("distsim");

namespace {

NdArray<double> random_tensor(std::vector<std::size_t> shape, std::uint64_t seed) {
    NdArray<double> a(std::move(shape));
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& v : a.data) v = u(gen);
    return a;
}

NdArray<double> field_as_tensor(const SphericalField& f) {
    return NdArray<double>({f.channels, f.grid.nlat, f.grid.nlon}, f.data);
}

SphericalField tensor_as_field(const NdArray<double>& a, const GridSpec& g) {
    SphericalField f(g, a.shape[0]);
    f.data = a.data;
    return f;
}

double max_abs(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

}  // namespace

TEST_CASE("communicator hierarchy: sizes, orthogonality, trivial groups") {
    const CommGrid g(1, 1, 2, 4);
    CHECK(g.world() == 8);
    CHECK(g.groups(CommAxis::polar).size() == 4);
    for (const auto& grp : g.groups(CommAxis::polar)) CHECK(grp.size() == 2);
    CHECK(g.groups(CommAxis::azimuth).size() == 2);
    for (const auto& grp : g.groups(CommAxis::azimuth)) CHECK(grp.size() == 4);

    const CommGrid t(1, 1, 1, 1);
    CHECK(t.world() == 1);
    for (auto axis : {CommAxis::batch, CommAxis::ensemble, CommAxis::polar, CommAxis::azimuth})
        CHECK(t.groups(axis).size() == 1);

    // every rank appears in exactly one group per axis
    const CommGrid q(2, 2, 1, 1);
    CHECK(q.world() == 4);
    for (auto axis : {CommAxis::batch, CommAxis::ensemble}) {
        std::vector<int> seen(q.world(), 0);
        for (const auto& grp : q.groups(axis))
            for (std::size_t r : grp) seen[r] += 1;
        for (int s : seen) CHECK(s == 1);
    }
}

TEST_CASE("canonical split follows the ceil/floor rule") {
    CHECK(canonical_split(10, 4) == std::vector<std::size_t>{3, 3, 2, 2});
    CHECK(canonical_split(8, 4) == std::vector<std::size_t>{2, 2, 2, 2});
    CHECK(canonical_split(5, 3) == std::vector<std::size_t>{2, 2, 1});
    CHECK(split_offset(canonical_split(10, 4), 2) == 6);
}

TEST_CASE("unshard inverts shard bit-exactly") {
    DistContext ctx{CommGrid(1, 1, 2, 4), {}};
    const NdArray<double> global = random_tensor({3, 9, 10}, 1);
    const auto views = shard(ctx, std::vector<NdArray<double>>{global}, {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
    CHECK(views[0].local.shape == std::vector<std::size_t>{3, 5, 3});
    const NdArray<double> back =
        unshard(ctx, views, {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
    CHECK(back.data == global.data);
}

TEST_CASE("sharding rejects extents smaller than the rank count") {
    DistContext ctx{CommGrid(1, 1, 1, 4), {}};
    const NdArray<double> global = random_tensor({1, 2, 3}, 2);
    CHECK_THROWS_AS((void)shard(ctx, std::vector<NdArray<double>>{global}, {{2, CommAxis::azimuth}}),
                    std::invalid_argument);
}

TEST_CASE("distributed transpose round-trips, including uneven splits both ways") {
    // C = 6, W = 10 over 4 ranks
    {
        DistContext ctx{CommGrid(1, 1, 1, 4), {}};
        const NdArray<double> global = random_tensor({6, 10}, 3);
        auto views = shard(ctx, std::vector<NdArray<double>>{global}, {{1, CommAxis::azimuth}});
        CHECK(views[0].split.at(1) == std::vector<std::size_t>{3, 3, 2, 2});
        distributed_transpose(ctx, views, CommAxis::azimuth, 1, 0);
        CHECK(views[0].split.at(0) == std::vector<std::size_t>{2, 2, 1, 1});
        CHECK(views[0].local.shape == std::vector<std::size_t>{2, 10});
        distributed_transpose(ctx, views, CommAxis::azimuth, 0, 1);
        const NdArray<double> back = unshard(ctx, views, {{1, CommAxis::azimuth}});
        CHECK(back.data == global.data);
    }
    // single rank: no-op
    {
        DistContext ctx{CommGrid(1, 1, 1, 1), {}};
        const NdArray<double> global = random_tensor({4, 5}, 4);
        auto views = shard(ctx, std::vector<NdArray<double>>{global}, {{1, CommAxis::azimuth}});
        distributed_transpose(ctx, views, CommAxis::azimuth, 1, 0);
        distributed_transpose(ctx, views, CommAxis::azimuth, 0, 1);
        CHECK(views[0].local.data == global.data);
    }
    // C = 5, W = 7 over 3 ranks
    {
        DistContext ctx{CommGrid(1, 1, 1, 3), {}};
        const NdArray<double> global = random_tensor({5, 7}, 5);
        auto views = shard(ctx, std::vector<NdArray<double>>{global}, {{1, CommAxis::azimuth}});
        distributed_transpose(ctx, views, CommAxis::azimuth, 1, 0);
        distributed_transpose(ctx, views, CommAxis::azimuth, 0, 1);
        const NdArray<double> back = unshard(ctx, views, {{1, CommAxis::azimuth}});
        CHECK(back.data == global.data);
    }
}

TEST_CASE("collective semantics: all_reduce, reduce_scatter, all_gather") {
    DistContext ctx{CommGrid(1, 1, 1, 4), {}};
    // one-hot contributions sum to the global vector
    std::vector<RankView<double>> views(4);
    for (std::size_t r = 0; r < 4; ++r) {
        views[r].local = NdArray<double>({4});
        views[r].local.data[r] = static_cast<double>(r + 1);
    }
    all_reduce(ctx, views, {CommAxis::azimuth});
    for (std::size_t r = 0; r < 4; ++r)
        CHECK(views[r].local.data == std::vector<double>{1.0, 2.0, 3.0, 4.0});

    // reduce_scatter equals all_reduce followed by canonical sharding
    std::vector<RankView<double>> a(4), b(4);
    for (std::size_t r = 0; r < 4; ++r) {
        a[r].local = random_tensor({10}, 10 + r);
        b[r].local = a[r].local;
    }
    reduce_scatter(ctx, a, CommAxis::azimuth, 0);
    all_reduce(ctx, b, {CommAxis::azimuth});
    const auto parts = canonical_split(10, 4);
    for (std::size_t r = 0; r < 4; ++r) {
        const auto want = slice_dim(b[r].local, 0, split_offset(parts, r), parts[r]);
        CHECK(a[r].local.data == want.data);
        CHECK(a[r].split.at(0) == parts);
    }

    // all_gather after shard restores the global tensor on every rank
    const NdArray<double> global = random_tensor({1, 2, 10}, 20);
    auto g = shard(ctx, std::vector<NdArray<double>>{global}, {{2, CommAxis::azimuth}});
    all_gather(ctx, g, CommAxis::azimuth, 2);
    for (std::size_t r = 0; r < 4; ++r) CHECK(g[r].local.data == global.data);
}

TEST_CASE("reduce_scatter rejects shape divergence") {
    DistContext ctx{CommGrid(1, 1, 1, 2), {}};
    std::vector<RankView<double>> views(2);
    views[0].local = NdArray<double>({3});
    views[1].local = NdArray<double>({4});
    CHECK_THROWS_AS(reduce_scatter(ctx, views, CommAxis::azimuth, 0),
                    std::invalid_argument);
}

TEST_CASE("distributed SHT equals the serial transform") {
    const GridSpec g = build_gaussian(16, 32);
    const std::size_t lmax = 16, mmax = 16;
    const SphericalField f = oracle::random_field(g, 3, 30);
    const SpectralCoeffs serial = sht_forward(f, lmax, mmax);

    for (auto [nh, nw] : std::vector<std::pair<std::size_t, std::size_t>>{
             {2, 4}, {1, 1}, {4, 2}}) {
        DistContext ctx{CommGrid(1, 1, nh, nw), {}};
        auto views = shard(ctx, std::vector<NdArray<double>>{field_as_tensor(f)},
                           {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
        auto out = dist_sht_forward(ctx, views, g, lmax, mmax);
        const auto gathered =
            unshard(ctx, out, {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
        double err = 0.0;
        for (std::size_t k = 0; k < serial.coeffs.size(); ++k)
            err = std::max(err, std::abs(gathered.data[k] - serial.coeffs[k]));
        CHECK(err <= 1e-12);
        CHECK(ctx.log.calls("dist_sht", "all_to_all") == 4);
    }
}

TEST_CASE("distributed SHT with mode truncation equals the truncated serial transform") {
    const GridSpec g = build_gaussian(16, 32);
    const std::size_t lmax = 16, mmax = 8;  // W/4
    const SphericalField f = oracle::random_field(g, 2, 31);
    const SpectralCoeffs serial = sht_forward(f, lmax, mmax);
    DistContext ctx{CommGrid(1, 1, 2, 4), {}};
    auto views = shard(ctx, std::vector<NdArray<double>>{field_as_tensor(f)},
                       {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
    auto out = dist_sht_forward(ctx, views, g, lmax, mmax);
    const auto gathered = unshard(ctx, out, {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
    double err = 0.0;
    for (std::size_t k = 0; k < serial.coeffs.size(); ++k)
        err = std::max(err, std::abs(gathered.data[k] - serial.coeffs[k]));
    CHECK(err <= 1e-12);
}

TEST_CASE("distributed DISCO equals the serial application") {
    const GridSpec in = build_gaussian(16, 32);
    const GridSpec out = build_gaussian(8, 16);
    const FilterBasis basis = morlet_basis(3.0 * pi / 8.0);
    const DiscoOperator op = assemble_disco(in, out, basis);
    std::mt19937_64 gen(32);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MixTensor mix(2, 3, basis.n_real());
    for (auto& v : mix.w) v = u(gen);
    const SphericalField f = oracle::random_field(in, 3, 33);
    const SphericalField serial = disco_apply(op, f, mix);

    for (auto [nh, nw] : std::vector<std::pair<std::size_t, std::size_t>>{
             {2, 2}, {1, 1}, {2, 4}}) {
        DistContext ctx{CommGrid(1, 1, nh, nw), {}};
        auto views = shard(ctx, std::vector<NdArray<double>>{field_as_tensor(f)},
                           {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
        auto res = dist_disco_apply(ctx, views, op, mix);
        const auto gathered =
            unshard(ctx, res, {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
        CHECK(max_abs(gathered.data, serial.data) <= 1e-12);
        CHECK(ctx.log.calls("dist_disco", "all_to_all") == 2);
        CHECK(ctx.log.calls("dist_disco", "reduce_scatter") == 1);
    }
}

TEST_CASE("distributed DISCO handles an odd latitude count over two ranks") {
    const GridSpec g = build_equiangular(9, 16);
    const FilterBasis basis = morlet_basis(3.0 * pi / 9.0);
    const DiscoOperator op = assemble_disco(g, g, basis);
    std::mt19937_64 gen(34);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MixTensor mix(1, 2, basis.n_real());
    for (auto& v : mix.w) v = u(gen);
    const SphericalField f = oracle::random_field(g, 2, 35);
    const SphericalField serial = disco_apply(op, f, mix);

    DistContext ctx{CommGrid(1, 1, 2, 2), {}};
    auto views = shard(ctx, std::vector<NdArray<double>>{field_as_tensor(f)},
                       {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
    CHECK(views[0].split.at(1) == std::vector<std::size_t>{5, 4});
    auto res = dist_disco_apply(ctx, views, op, mix);
    const auto gathered = unshard(ctx, res, {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
    CHECK(max_abs(gathered.data, serial.data) <= 1e-12);
}

TEST_CASE("distributed CRPS equals the serial field CRPS") {
    const GridSpec g = build_gaussian(8, 16);
    const std::size_t E = 8, C = 2;
    std::mt19937_64 gen(36);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    EnsembleField ens(g, E, C);
    for (auto& v : ens.values) v = u(gen);
    const SphericalField obs = oracle::random_field(g, C, 37);
    const std::vector<double> serial = crps_field(ens, obs, g, CrpsVariant::fair);

    const NdArray<double> fglobal({E, C, g.nlat, g.nlon}, ens.values);
    const NdArray<double> oglobal({C, g.nlat, g.nlon}, obs.data);

    for (auto [ne, nh, nw] : std::vector<std::array<std::size_t, 3>>{
             {4, 2, 2}, {1, 2, 2}, {2, 1, 1}, {1, 1, 1}}) {
        DistContext ctx{CommGrid(1, ne, nh, nw), {}};
        std::vector<NdArray<double>> fproblems(ne, fglobal), oproblems(ne, oglobal);
        auto fviews = shard(ctx, fproblems,
                            {{0, CommAxis::ensemble},
                             {2, CommAxis::polar},
                             {3, CommAxis::azimuth}});
        auto oviews = shard(ctx, oproblems,
                            {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
        const auto scores = dist_crps(ctx, fviews, oviews, g, CrpsVariant::fair);
        CHECK(max_abs(scores[0], serial) <= 1e-12);
    }
}

TEST_CASE("distributed CRPS handles spatial shards not divisible by the ensemble axis") {
    // Sloc = 5*2 = 10 per rank over nE = 4 -> SlocE = [3,3,2,2]
    const GridSpec g = build_gaussian(5, 8);
    const std::size_t E = 8, C = 1;
    std::mt19937_64 gen(38);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    EnsembleField ens(g, E, C);
    for (auto& v : ens.values) v = u(gen);
    const SphericalField obs = oracle::random_field(g, C, 39);
    const std::vector<double> serial = crps_field(ens, obs, g, CrpsVariant::fair);

    DistContext ctx{CommGrid(1, 4, 1, 4), {}};
    std::vector<NdArray<double>> fproblems(4, NdArray<double>({E, C, g.nlat, g.nlon},
                                                              ens.values));
    std::vector<NdArray<double>> oproblems(4, NdArray<double>({C, g.nlat, g.nlon},
                                                              obs.data));
    auto fviews = shard(ctx, fproblems,
                        {{0, CommAxis::ensemble}, {2, CommAxis::polar},
                         {3, CommAxis::azimuth}});
    auto oviews = shard(ctx, oproblems, {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
    const auto scores = dist_crps(ctx, fviews, oviews, g, CrpsVariant::fair);
    CHECK(max_abs(scores[0], serial) <= 1e-12);
    CHECK(ctx.log.calls("dist_crps", "all_to_all") == 1);
    CHECK(ctx.log.calls("dist_crps", "scatter") == 1);
    CHECK(ctx.log.calls("dist_crps", "all_reduce") == 1);
}

TEST_CASE("simulated collectives are deterministic across runs") {
    const GridSpec g = build_gaussian(12, 24);
    const SphericalField f = oracle::random_field(g, 2, 40);
    auto run = [&] {
        DistContext ctx{CommGrid(1, 1, 2, 4), {}};
        auto views = shard(ctx, std::vector<NdArray<double>>{field_as_tensor(f)},
                           {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
        auto out = dist_sht_forward(ctx, views, g, 12, 12);
        return unshard(ctx, out, {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.data == b.data);
}

TEST_CASE("traffic report renders one aggregated CSV row per collective") {
    const GridSpec g = build_gaussian(8, 16);
    const SphericalField f = oracle::random_field(g, 2, 41);
    DistContext ctx{CommGrid(1, 1, 2, 2), {}};
    auto views = shard(ctx, std::vector<NdArray<double>>{field_as_tensor(f)},
                       {{1, CommAxis::polar}, {2, CommAxis::azimuth}});
    (void)dist_sht_forward(ctx, views, g, 8, 8);
    const std::string csv = ctx.log.csv();
    CHECK(csv.find("operation,axis,collective,bytes,calls") == 0);
    CHECK(csv.find("dist_sht,azimuth,all_to_all") != std::string::npos);
    CHECK(csv.find("dist_sht,polar,all_to_all") != std::string::npos);
}

TEST_SUITE_END();

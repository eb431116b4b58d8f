#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "privsim/dataset.hpp"

using namespace privsim;

namespace {

RawTable table_from(const std::string& csv) {
    std::istringstream in(csv);
    return parse_csv(in, "<test>");
}

Schema schema_from(const std::string& json_text) {
    return Schema::from_json(nlohmann::json::parse(json_text));
}

}  // namespace

TEST_CASE("binary column maps to 0/1") {
    RawTable t = table_from("sex,income\nmale,10\nfemale,20\nmale,30\n");
    Schema s = schema_from(R"({"sex":"binary","income":"label"})");
    Dataset ds = prepare(t, s, {});
    std::set<double> values(ds.features.data().begin(), ds.features.data().end());
    CHECK(values == std::set<double>{0.0, 1.0});
}

TEST_CASE("categorical becomes one-hot with exactly one hot per row") {
    RawTable t = table_from("color,y\nred,1\ngreen,2\nblue,3\ngreen,4\n");
    Schema s = schema_from(R"({"color":"categorical","y":"label"})");
    Dataset ds = prepare(t, s, {});
    CHECK(ds.dim() == 3);
    for (std::size_t r = 0; r < ds.n(); ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            double v = ds.features(r, c);
            CHECK((v == 0.0 || v == 1.0));
            sum += v;
        }
        CHECK(sum == 1.0);
    }
}

TEST_CASE("numeric min-max endpoints") {
    RawTable t = table_from("v,y\n10,1\n20,2\n30,3\n");
    Schema s = schema_from(R"({"v":"numeric","y":"label"})");
    Dataset ds = prepare(t, s, {});
    CHECK(ds.features(0, 0) == 0.0);
    CHECK(ds.features(1, 0) == doctest::Approx(0.5));
    CHECK(ds.features(2, 0) == 1.0);
}

TEST_CASE("unseen category errors with column and value") {
    RawTable train = table_from("color,y\nred,1\nblue,2\n");
    Schema s = schema_from(R"({"color":"categorical","y":"label"})");
    Encoder enc;
    prepare(train, s, {}, &enc);
    RawTable test = table_from("color,y\ngreen,1\n");
    CHECK_THROWS_WITH_AS(enc.transform(test), doctest::Contains("green"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(enc.transform(test), doctest::Contains("color"), std::invalid_argument);
}

TEST_CASE("constant numeric column maps to 0 with a warning") {
    RawTable t = table_from("v,y\n5,1\n5,2\n");
    Schema s = schema_from(R"({"v":"numeric","y":"label"})");
    Encoder enc;
    Dataset ds = prepare(t, s, {}, &enc);
    CHECK(ds.features(0, 0) == 0.0);
    CHECK(ds.features(1, 0) == 0.0);
    REQUIRE(enc.warnings().size() == 1);
    CHECK(enc.warnings()[0].find("constant") != std::string::npos);
}

TEST_CASE("label log transform and floor") {
    RawTable t = table_from("v,y\n1,0\n2,9\n3,99\n");
    Schema s = schema_from(R"({"v":"numeric","y":"label"})");
    PrepareOptions opt;
    opt.label_log1p = true;
    Dataset ds = prepare(t, s, opt);
    // log1p: 0, log10, log100 -> scaled 0, 1/2, 1 -> rescaled into [y_floor, 1]
    CHECK(ds.labels[0] == kDefaultYFloor);
    CHECK(ds.labels[1] == doctest::Approx(kDefaultYFloor + 0.5 * (1 - kDefaultYFloor)));
    CHECK(ds.labels[2] == 1.0);
}

TEST_CASE("prepare is idempotent on already-prepared data") {
    RawTable t = table_from("a,b,y\n1,x,10\n4,y,20\n9,x,35\n2,y,40\n");
    Schema s = schema_from(R"({"a":"numeric","b":"binary","y":"label"})");
    Dataset once = prepare(t, s, {});

    // re-encode the prepared values under a schema matching their shape
    std::ostringstream csv;
    csv.precision(17);
    csv << "a,b,y\n";
    for (std::size_t r = 0; r < once.n(); ++r)
        csv << once.features(r, 0) << "," << once.features(r, 1) << "," << once.labels[r] << "\n";
    RawTable t2 = table_from(csv.str());
    Schema s2 = schema_from(R"({"a":"numeric","b":"numeric","y":"label"})");
    Dataset twice = prepare(t2, s2, {});
    for (std::size_t r = 0; r < once.n(); ++r) {
        CHECK(twice.features(r, 0) == doctest::Approx(once.features(r, 0)).epsilon(1e-12));
        CHECK(twice.features(r, 1) == doctest::Approx(once.features(r, 1)).epsilon(1e-12));
        CHECK(twice.labels[r] == doctest::Approx(once.labels[r]).epsilon(1e-12));
    }
}

TEST_CASE("manifest round-trips the encoder") {
    RawTable t = table_from("color,v,y\nred,1,5\nblue,2,6\nred,3,9\n");
    Schema s = schema_from(R"({"color":"categorical","v":"numeric","y":"label"})");
    Encoder enc;
    Dataset ds = prepare(t, s, {}, &enc);
    Encoder back = Encoder::from_manifest(enc.manifest());
    Dataset ds2 = back.transform(t);
    CHECK(max_abs_diff(ds.features, ds2.features) == 0.0);
}

TEST_CASE("partition: exact division, disjoint") {
    Dataset ds;
    ds.features = Matrix(100, 2, 0.5);
    ds.labels.assign(100, 0.5);
    PartitionSpec spec;
    spec.participants = 10;
    Rng rng(5);
    PartitionPlan plan = partition(ds, spec, rng);
    REQUIRE(plan.shards.size() == 10);
    std::set<std::size_t> seen;
    for (const auto& shard : plan.shards) {
        CHECK(shard.size() == 10);
        for (std::size_t i : shard) CHECK(seen.insert(i).second);  // pairwise disjoint
    }
    CHECK(seen.size() == 100);
}

TEST_CASE("partition: validation/test disjoint from shards, deterministic") {
    Dataset ds;
    ds.features = Matrix(50, 1, 0.0);
    ds.labels.assign(50, 0.5);
    PartitionSpec spec;
    spec.participants = 3;
    spec.validation_size = 10;
    spec.test_size = 5;
    Rng a(9), b(9);
    PartitionPlan p1 = partition(ds, spec, a);
    PartitionPlan p2 = partition(ds, spec, b);
    CHECK(p1.validation == p2.validation);
    CHECK(p1.shards == p2.shards);

    std::set<std::size_t> seen;
    for (std::size_t i : p1.validation) CHECK(seen.insert(i).second);
    for (std::size_t i : p1.test) CHECK(seen.insert(i).second);
    for (const auto& shard : p1.shards)
        for (std::size_t i : shard) CHECK(seen.insert(i).second);

    spec.validation_size = 60;
    Rng c(1);
    CHECK_THROWS_AS(partition(ds, spec, c), std::invalid_argument);
}

TEST_CASE("partition: special-holdout rule routes out-of-range rows") {
    Dataset ds;
    ds.features = Matrix(40, 1);
    ds.labels.assign(40, 0.5);
    for (std::size_t i = 0; i < 40; ++i) ds.features(i, 0) = double(i) / 39.0;
    PartitionSpec spec;
    spec.participants = 4;
    spec.special = SpecialRule{"age", 0.25, 0.7, 0};
    spec.special_participants = 1;
    Rng rng(11);
    PartitionPlan plan = partition(ds, spec, rng);

    auto matches = [&](std::size_t i) {
        double v = ds.features(i, 0);
        return v < 0.25 || v > 0.7;
    };
    for (std::size_t i : plan.shards[0]) CHECK(matches(i));          // special shard
    for (std::size_t i : plan.special_test) CHECK(matches(i));
    for (std::size_t p = 1; p < 4; ++p)
        for (std::size_t i : plan.shards[p]) CHECK(!matches(i));     // general kept general
    // every matching row landed in the special shard or special test set
    std::set<std::size_t> special_rows(plan.shards[0].begin(), plan.shards[0].end());
    special_rows.insert(plan.special_test.begin(), plan.special_test.end());
    for (std::size_t i = 0; i < 40; ++i)
        if (matches(i)) CHECK(special_rows.count(i) == 1);
}

TEST_CASE("corrupt: identity at p=0, exact count, label-only mode") {
    SynthSpec spec;
    spec.n = 100;
    spec.d = 3;
    Rng gen(3);
    Dataset ds = synth_regression(spec, gen);

    Rng r0(1);
    Dataset same = corrupt(ds, ReliabilityProfile::unreliable(0.0), r0);
    CHECK(max_abs_diff(same.features, ds.features) == 0.0);

    Rng r1(1);
    Dataset hit = corrupt(ds, ReliabilityProfile::unreliable(0.4), r1);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        bool differs = hit.labels[i] != ds.labels[i];
        for (std::size_t c = 0; c < ds.dim(); ++c)
            if (hit.features(i, c) != ds.features(i, c)) differs = true;
        if (differs) ++changed;
    }
    CHECK(changed == 40);

    Rng r2(1);
    Dataset label_only = corrupt(ds, ReliabilityProfile::unreliable(0.4), r2, true);
    CHECK(max_abs_diff(label_only.features, ds.features) == 0.0);
}

TEST_CASE("corrupt: p=1 output uncorrelated with the original") {
    SynthSpec spec;
    spec.n = 10000;
    spec.d = 2;
    Rng gen(17);
    Dataset ds = synth_regression(spec, gen);
    Rng r(23);
    Dataset noise = corrupt(ds, ReliabilityProfile::unreliable(1.0), r);

    auto corr = [&](auto get_a, auto get_b) {
        double ma = 0, mb = 0;
        for (std::size_t i = 0; i < ds.n(); ++i) {
            ma += get_a(i);
            mb += get_b(i);
        }
        ma /= double(ds.n());
        mb /= double(ds.n());
        double cov = 0, va = 0, vb = 0;
        for (std::size_t i = 0; i < ds.n(); ++i) {
            double da = get_a(i) - ma, db = get_b(i) - mb;
            cov += da * db;
            va += da * da;
            vb += db * db;
        }
        return cov / std::sqrt(va * vb);
    };
    double c0 = corr([&](std::size_t i) { return ds.features(i, 0); },
                     [&](std::size_t i) { return noise.features(i, 0); });
    double cl = corr([&](std::size_t i) { return ds.labels[i]; },
                     [&](std::size_t i) { return noise.labels[i]; });
    CHECK(std::abs(c0) < 0.05);
    CHECK(std::abs(cl) < 0.05);
    for (double v : noise.features.data()) {
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
    }
}

TEST_CASE("synthetic data: determinism and the zero-noise oracle") {
    SynthSpec spec;
    spec.n = 200;
    spec.d = 4;
    spec.noise_sd = 0.1;

    Rng a(77), b(77);
    Dataset d1 = synth_regression(spec, a);
    Dataset d2 = synth_regression(spec, b);
    CHECK(max_abs_diff(d1.features, d2.features) == 0.0);
    CHECK(d1.labels == d2.labels);

    // same seed, noise off: identical features, noiseless labels
    SynthSpec clean = spec;
    clean.noise_sd = 0.0;
    Rng c(77);
    Dataset truth = synth_regression(clean, c);
    CHECK(max_abs_diff(d1.features, truth.features) == 0.0);
    std::size_t moved = 0;
    for (std::size_t i = 0; i < spec.n; ++i)
        if (d1.labels[i] != truth.labels[i]) ++moved;
    CHECK(moved > 150);  // noise actually applied

    for (std::size_t i = 0; i < spec.n; ++i) {
        REQUIRE(truth.labels[i] >= spec.y_floor);
        REQUIRE(truth.labels[i] <= 1.0);
    }
}

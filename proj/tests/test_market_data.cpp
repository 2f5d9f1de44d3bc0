#include "ddqn/errors.hpp"
#include "ddqn/market_data.hpp"
#include "test_support.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace ddqn;
using namespace ddqn::data;
using Catch::Approx;
using ddqn::testing::TempDir;
using ddqn::testing::write_text;

namespace {

PriceSeries series_of(const std::vector<double>& closes, const std::string& id = "sp500",
                      Date start = Date{std::chrono::year{2020} / 1 / 1}) {
    PriceSeries s{id, {}};
    Date d = start;
    for (const double c : closes) {
        s.rows.push_back({d, c});
        d += std::chrono::days{1};
    }
    return s;
}

ReturnSeries returns_of(const std::vector<double>& values) {
    ReturnSeries r{"x", 1, {}, values};
    Date d{std::chrono::year{2020} / 1 / 1};
    for (std::size_t i = 0; i < values.size(); ++i) r.dates.push_back(d + std::chrono::days{static_cast<int>(i)});
    return r;
}

} // namespace

TEST_CASE("dates round-trip through ISO-8601 text") {
    const auto d = parse_date("2019-02-28");
    CHECK(format_date(d) == "2019-02-28");
    CHECK_THROWS_AS(parse_date("2019-02-30"), DataError);
    CHECK_THROWS_AS(parse_date("20190228"), DataError);
}

TEST_CASE("load_csv parses, drops bad closes and sorts") {
    TempDir tmp("csv");

    SECTION("two rows") {
        write_text(tmp / "a.csv", "date,close\n2020-01-01,100.0\n2020-01-02,101.0\n");
        const auto r = load_csv(tmp / "a.csv", "sp500");
        REQUIRE(r.series.size() == 2);
        CHECK(r.series.rows[1].close == 101.0);
        CHECK(r.dropped_rows == 0);
    }
    SECTION("empty close cell is dropped and counted") {
        write_text(tmp / "b.csv", "date,close\r\n2020-01-01,100.0\r\n2020-01-02,\r\n2020-01-03,102.5\r\n");
        const auto r = load_csv(tmp / "b.csv", "sp500");
        CHECK(r.series.size() == 2);
        CHECK(r.dropped_rows == 1);
    }
    SECTION("out-of-order rows come back sorted") {
        const std::vector<std::string> dates{"2020-03-05", "2020-01-02", "2021-07-01", "2020-02-29", "2019-12-31"};
        std::string text = "open,date,close\n";
        for (std::size_t i = 0; i < dates.size(); ++i) text += "1," + dates[i] + "," + std::to_string(100 + i) + "\n";
        write_text(tmp / "c.csv", text);
        const auto r = load_csv(tmp / "c.csv", "sp500");

        auto expected = dates;
        std::ranges::sort(expected);
        REQUIRE(r.series.size() == expected.size());
        for (std::size_t i = 0; i < expected.size(); ++i) CHECK(format_date(r.series.rows[i].date) == expected[i]);
    }
    SECTION("duplicate dates are rejected with the date") {
        write_text(tmp / "d.csv", "date,close\n2020-01-01,1\n2020-01-01,2\n");
        CHECK_THROWS_WITH(load_csv(tmp / "d.csv", "x"), Catch::Matchers::ContainsSubstring("2020-01-01"));
    }
    SECTION("missing file and no valid rows") {
        CHECK_THROWS_AS(load_csv(tmp / "nope.csv", "x"), DataError);
        write_text(tmp / "e.csv", "date,close\n2020-01-01,abc\n");
        CHECK_THROWS_AS(load_csv(tmp / "e.csv", "x"), DataError);
        write_text(tmp / "f.csv", "day,price\n2020-01-01,1\n");
        CHECK_THROWS_AS(load_csv(tmp / "f.csv", "x"), DataError);
    }
}

TEST_CASE("log_returns") {
    CHECK(log_returns(series_of({100, 100}), 1).values == std::vector<double>{0.0});
    CHECK(log_returns(series_of({100, 100 * std::exp(0.01)}), 1).values[0] == Approx(0.01).epsilon(1e-12));

    std::vector<double> geo{100.0};
    for (int i = 0; i < 30; ++i) geo.push_back(geo.back() * 1.001);
    const auto r5 = log_returns(series_of(geo), 5);
    CHECK(r5.size() == geo.size() - 5);
    for (const double v : r5.values) CHECK(v == Approx(5.0 * std::log(1.001)).epsilon(1e-10));

    CHECK_THROWS_AS(log_returns(series_of({1, 2, 3}), 2), ConfigError);
    CHECK_THROWS_AS(log_returns(series_of({1, 2, 3, 4, 5}), 5), DataError);
}

TEST_CASE("cumulative log returns recover the price ratio") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto rets = ddqn::testing::random_returns(300, 0.02, seed);
        std::vector<double> closes{50.0 + static_cast<double>(seed)};
        for (const double r : rets) closes.push_back(closes.back() * std::exp(r));
        const auto lr = log_returns(series_of(closes), 1);
        double cum = 0.0;
        for (std::size_t t = 0; t < lr.size(); ++t) {
            cum += lr.values[t];
            const double expected = closes[t + 1] / closes[0];
            REQUIRE(std::abs(std::exp(cum) - expected) / expected < 1e-12);
        }
    }
}

TEST_CASE("ewma_vol recursion") {
    SECTION("zero returns give zero volatility") {
        const auto v = ewma_vol(returns_of(std::vector<double>(50, 0.0)), 0.94);
        CHECK(std::ranges::all_of(v.sigma, [](double s) { return s == 0.0; }));
    }
    SECTION("constant returns converge to |c|") {
        const auto v = ewma_vol(returns_of(std::vector<double>(2000, -0.013)), 0.94);
        CHECK(v.sigma.back() == Approx(0.013).epsilon(1e-12));
    }
    SECTION("hand recursion with an explicit seed") {
        const auto v = ewma_vol(returns_of({0.02, 0.0}), 0.5, 0.0004);
        CHECK(v.sigma[0] * v.sigma[0] == Approx(0.0004).epsilon(1e-12));
        CHECK(v.sigma[1] * v.sigma[1] == Approx(0.0002).epsilon(1e-12));
    }
    SECTION("default seed is the mean square of the first 20 returns") {
        std::vector<double> r(30);
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = 0.001 * static_cast<double>(i % 7) - 0.003;
        double seed = 0.0;
        for (std::size_t i = 0; i < 20; ++i) seed += r[i] * r[i];
        seed /= 20.0;
        const auto v = ewma_vol(returns_of(r), 0.9);
        CHECK(v.sigma[0] * v.sigma[0] == Approx(0.9 * seed + 0.1 * r[0] * r[0]).epsilon(1e-12));
    }
    SECTION("decay out of range") {
        CHECK_THROWS_AS(ewma_vol(returns_of({0.1}), 1.0), ConfigError);
        CHECK_THROWS_AS(ewma_vol(returns_of({0.1}), 0.0), ConfigError);
    }
}

TEST_CASE("normalize divides by annualised volatility") {
    const double k = 1.0 / std::sqrt(252.0);
    auto r = returns_of({0.0, 0.01, -0.02, 0.0});
    VolSeries v{"x", 0.94, r.dates, {0.01, 0.01, 0.02, 0.0}};
    const auto n = normalize(r, v);
    CHECK(n.values[0] == 0.0);
    CHECK(n.values[1] == Approx(k).epsilon(1e-12));
    CHECK(n.values[1] == Approx(0.06299407883487121).epsilon(1e-12));
    CHECK(n.values[2] == Approx(-k).epsilon(1e-12));
    CHECK(n.values[3] == 0.0);

    auto bad = returns_of({0.01});
    VolSeries zero{"x", 0.94, bad.dates, {0.0}};
    CHECK_THROWS_WITH(normalize(bad, zero), Catch::Matchers::ContainsSubstring("2020-01-01"));
}

TEST_CASE("normalized features are invariant to price scale") {
    auto closes = ddqn::testing::random_returns(200, 0.01, 3);
    std::vector<double> prices{100.0};
    for (const double r : closes) prices.push_back(prices.back() * std::exp(r));
    std::vector<double> scaled = prices;
    for (auto& p : scaled) p *= 37.5;

    std::map<std::string, PriceSeries> a{{"sp500", series_of(prices)}};
    std::map<std::string, PriceSeries> b{{"sp500", series_of(scaled)}};
    const auto fa = build_features(ModelId::M0, a);
    const auto fb = build_features(ModelId::M0, b);
    REQUIRE(fa.values.size() == fb.values.size());
    for (std::size_t i = 0; i < fa.values.size(); ++i) CHECK(fa.values[i] == Approx(fb.values[i]).margin(1e-9));
}

TEST_CASE("build_features column counts and join semantics") {
    std::map<std::string, PriceSeries> assets;
    const std::vector<std::string> ids{"sp500", "russell2000", "wti", "gold"};
    for (std::size_t k = 0; k < ids.size(); ++k) {
        SynthSpec s;
        s.n_days = 120;
        s.seed = k + 1;
        s.asset_id = ids[k];
        assets[ids[k]] = synth_generate(s);
    }
    for (int m = 0; m <= 3; ++m) {
        const auto f = build_features(model_from_index(m), assets);
        CHECK(f.width() == static_cast<std::size_t>(2 * (m + 1)));
        CHECK(f.width() == feature_count(model_from_index(m)));
        CHECK(std::ranges::all_of(f.values, [](double v) { return std::isfinite(v); }));
        CHECK(f.rows() == 120 - 5);
    }

    SECTION("target returns are raw S&P log returns") {
        const auto f = build_features(ModelId::M0, assets);
        const auto raw = log_returns(assets["sp500"], 1);
        for (std::size_t i = 0; i < f.rows(); ++i) CHECK(f.target_returns[i] == raw.values[i + 4]);
    }

    SECTION("a date missing from one asset drops that row") {
        auto holey = assets;
        const auto missing = holey["russell2000"].rows[60].date;
        holey["russell2000"].rows.erase(holey["russell2000"].rows.begin() + 60);
        const auto f = build_features(ModelId::M1, holey);
        CHECK(std::ranges::find(f.dates, missing) == f.dates.end());
        CHECK(f.rows() < 115);
    }

    SECTION("missing required asset") {
        std::map<std::string, PriceSeries> only{{"sp500", assets["sp500"]}};
        CHECK_THROWS_WITH(build_features(ModelId::M3, only), Catch::Matchers::ContainsSubstring("russell2000"));
    }

    SECTION("disjoint dates") {
        auto shifted = assets;
        shifted["russell2000"] = series_of(std::vector<double>(50, 10.0), "russell2000",
                                           Date{std::chrono::year{1990} / 1 / 1});
        CHECK_THROWS_AS(build_features(ModelId::M1, shifted), DataError);
    }
}

TEST_CASE("split partitions by date") {
    SynthSpec s;
    s.n_days = 105;
    std::map<std::string, PriceSeries> assets{{"sp500", synth_generate(s)}};
    const auto f = build_features(ModelId::M0, assets);
    REQUIRE(f.rows() == 100);

    const auto parts = split(f, {f.dates.front(), f.dates[69], f.dates.back()});
    CHECK(parts.train.rows() == 70);
    CHECK(parts.test.rows() == 30);
    CHECK(parts.train.dates.back() < parts.test.dates.front());

    // Boundary on a non-trading day (weekend after a Friday) loses nothing.
    const auto weekend = f.dates[69] + std::chrono::days{1};
    const auto p2 = split(f, {f.dates.front(), weekend, f.dates.back()});
    CHECK(p2.train.rows() + p2.test.rows() == f.rows());

    CHECK_THROWS_AS(split(f, {f.dates.front(), f.dates.back() + std::chrono::days{3},
                              f.dates.back() + std::chrono::days{10}}),
                    ConfigError);
    CHECK_THROWS_AS(split(f, {f.dates[10], f.dates[5], f.dates[50]}), ConfigError);
    CHECK_THROWS_AS(split(f, {f.dates.front(), f.dates.back() - std::chrono::days{0}, f.dates.back() + std::chrono::days{5}}),
                    DataError);
}

TEST_CASE("frame CSV round trip") {
    TempDir tmp("frame");
    SynthSpec s;
    s.n_days = 60;
    std::map<std::string, PriceSeries> assets{{"sp500", synth_generate(s)}};
    const auto f = build_features(ModelId::M0, assets);
    write_frame_csv(f, tmp / "f.csv");
    const auto g = read_frame_csv(tmp / "f.csv", ModelId::M0);
    CHECK(g.dates == f.dates);
    CHECK(g.values == f.values);
    CHECK(g.target_returns == f.target_returns);
    CHECK(ddqn::testing::read_text(tmp / "f.csv").starts_with("date,f0,f1,target_return\n"));
    CHECK_THROWS_AS(read_frame_csv(tmp / "f.csv", ModelId::M2), DataError);
}

TEST_CASE("synthetic generator") {
    SECTION("noiseless trend is an exact geometric sequence") {
        SynthSpec s;
        s.vol = 0.0;
        s.drift = 0.001;
        s.n_days = 10;
        const auto p = synth_generate(s);
        for (std::size_t i = 1; i < p.size(); ++i) {
            CHECK(p.rows[i].close / p.rows[i - 1].close == Approx(std::exp(0.001)).epsilon(1e-13));
        }
        validate(p);
    }
    SECTION("same seed, same series; different seed, different series") {
        SynthSpec s;
        s.seed = 99;
        const auto a = synth_generate(s);
        const auto b = synth_generate(s);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.rows[i].close == b.rows[i].close);
        s.seed = 100;
        CHECK(synth_generate(s).rows[5].close != a.rows[5].close);
    }
    SECTION("mean-revert without noise alternates exactly") {
        SynthSpec s;
        s.vol = 0.0;
        s.regime = Regime::MeanRevert;
        s.amplitude = 0.01;
        s.n_days = 40;
        const auto r = log_returns(synth_generate(s), 1);
        for (std::size_t t = 0; t < r.size(); ++t) {
            const double expected = t % 2 == 0 ? 0.01 : -0.01;
            CHECK(r.values[t] == Approx(expected).margin(1e-12));
        }
    }
    SECTION("flat regime ignores drift") {
        SynthSpec s;
        s.vol = 0.0;
        s.drift = 0.05;
        s.regime = Regime::Flat;
        const auto p = synth_generate(s);
        CHECK(p.rows.back().close == Approx(p.rows.front().close));
    }
    SECTION("preconditions") {
        SynthSpec s;
        s.n_days = 9;
        CHECK_THROWS_AS(synth_generate(s), ConfigError);
        s.n_days = 10;
        s.vol = -1.0;
        CHECK_THROWS_AS(synth_generate(s), ConfigError);
    }
}

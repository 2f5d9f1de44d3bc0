#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ddqn::data {

using Date = std::chrono::sys_days;

// ISO-8601 "YYYY-MM-DD"; throws DataError on anything else.
Date parse_date(std::string_view text);
std::string format_date(Date d);

// Canonical asset identifiers for the four traded/observed instruments.
inline constexpr std::string_view kSp500 = "sp500";
inline constexpr std::string_view kRussell2000 = "russell2000";
inline constexpr std::string_view kWti = "wti";
inline constexpr std::string_view kGold = "gold";

struct PricePoint {
    Date date;
    double close = 0.0;
};

struct PriceSeries {
    std::string asset_id;
    std::vector<PricePoint> rows;

    std::size_t size() const noexcept { return rows.size(); }
};

struct CsvLoad {
    PriceSeries series;
    std::size_t dropped_rows = 0;
};

// Reads a `date,close` CSV (extra columns ignored, header required).
// Rows with a missing or unparseable close are dropped and counted;
// the result is sorted by date. Duplicate dates are rejected.
CsvLoad load_csv(const std::filesystem::path& path, std::string asset_id);

// Throws DataError unless dates strictly increase and all closes are positive.
void validate(const PriceSeries& series);

struct ReturnSeries {
    std::string asset_id;
    int horizon = 1;
    std::vector<Date> dates;
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
};

struct VolSeries {
    std::string asset_id;
    double decay = 0.94;
    std::vector<Date> dates;
    std::vector<double> sigma;

    std::size_t size() const noexcept { return sigma.size(); }
};

// value_t = ln(close_t / close_{t-horizon}), horizon in {1, 5}.
ReturnSeries log_returns(const PriceSeries& series, int horizon);

inline constexpr std::size_t kEwmaSeedWindow = 20;

// sigma_t^2 = decay * sigma_{t-1}^2 + (1 - decay) * r_t^2, seeded with the
// mean squared return of the first kEwmaSeedWindow observations unless an
// explicit seed variance is supplied.
VolSeries ewma_vol(const ReturnSeries& returns, double decay,
                   std::optional<double> seed_variance = std::nullopt);

// Horizon-specific annualisation for multi-day returns.
enum class HorizonScale {
    Daily,     // r / (sigma * sqrt(252)) for every horizon
    PerHorizon // r / (sigma * sqrt(252 / horizon))
};

// out_t = r_t / (sigma_t * sqrt(252)); rows are matched to vol by date.
// sigma_t == 0 with r_t == 0 yields 0; sigma_t == 0 with r_t != 0 throws.
ReturnSeries normalize(const ReturnSeries& returns, const VolSeries& vol,
                       HorizonScale scale = HorizonScale::Daily);

enum class ModelId : std::uint8_t { M0 = 0, M1 = 1, M2 = 2, M3 = 3 };

ModelId model_from_index(int index);
std::string model_name(ModelId model);

// Assets observed by a model, traded asset first.
std::vector<std::string> required_assets(ModelId model);

inline std::size_t feature_count(ModelId model) {
    return 2 * (static_cast<std::size_t>(model) + 1);
}

struct FeatureColumn {
    std::string asset_id;
    int horizon = 1;

    std::string name() const;
};

// Date-aligned matrix of normalized returns (row-major) plus the raw 1-day
// log return of the traded asset on each date.
struct FeatureFrame {
    ModelId model = ModelId::M0;
    std::vector<Date> dates;
    std::vector<FeatureColumn> columns;
    std::vector<double> values;
    std::vector<double> target_returns;

    std::size_t rows() const noexcept { return dates.size(); }
    std::size_t width() const noexcept { return columns.size(); }

    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * width(), width()};
    }

    // Rows [first, last) as a new frame.
    FeatureFrame slice(std::size_t first, std::size_t last) const;
};

struct FeatureOptions {
    double decay = 0.94;
    HorizonScale five_day_scale = HorizonScale::Daily;
};

FeatureFrame build_features(ModelId model, const std::map<std::string, PriceSeries>& assets,
                            const FeatureOptions& options = {});

struct SplitSpec {
    Date train_start;
    Date train_end;
    Date test_end;
};

struct FrameSplit {
    FeatureFrame train;
    FeatureFrame test;
};

// train = rows dated in [train_start, train_end], test = (train_end, test_end].
FrameSplit split(const FeatureFrame& frame, const SplitSpec& spec);

// Columnar CSV: `date,f0..f{n-1},target_return`.
void write_frame_csv(const FeatureFrame& frame, const std::filesystem::path& path);
FeatureFrame read_frame_csv(const std::filesystem::path& path, ModelId model);

enum class Regime { Trend, MeanRevert, Flat };

Regime regime_from_string(std::string_view name);
std::string regime_name(Regime regime);

struct SynthSpec {
    double drift = 0.0;      // per day
    double vol = 0.01;       // per day
    double amplitude = 0.0;  // sign-alternating component (mean-revert only)
    std::size_t n_days = 1000;
    std::uint64_t seed = 0;
    Regime regime = Regime::Trend;
    double start_price = 100.0;
    Date start_date = Date{std::chrono::year{2000} / 1 / 3};
    std::string asset_id{kSp500};
};

// Business-day price path whose 1-day log return on day t is
//   trend:      drift + vol * z_t
//   meanrevert: drift + amplitude * (-1)^(t-1) + vol * z_t
//   flat:       vol * z_t
PriceSeries synth_generate(const SynthSpec& spec);

} // namespace ddqn::data

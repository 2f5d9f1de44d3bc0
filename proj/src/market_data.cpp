#include "ddqn/market_data.hpp"

#include "ddqn/errors.hpp"
#include "ddqn/rng.hpp"
#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace ddqn::data {

namespace {

constexpr double kTradingDays = 252.0;

std::vector<std::string> split_fields(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.emplace_back(util::trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string lower(std::string s) {
    std::ranges::transform(s, s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

} // namespace

Date parse_date(std::string_view text) {
    text = util::trim(text);
    int y = 0;
    unsigned m = 0, d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
        !util::parse_int(text.substr(0, 4), y) || !util::parse_int(text.substr(5, 2), m) ||
        !util::parse_int(text.substr(8, 2), d)) {
        throw DataError("invalid date '" + std::string(text) + "', expected YYYY-MM-DD");
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw DataError("invalid calendar date '" + std::string(text) + "'");
    return Date{ymd};
}

std::string format_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

CsvLoad load_csv(const std::filesystem::path& path, std::string asset_id) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read price file " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty price file " + path.string());
    const auto header = split_fields(util::strip_cr(line));
    std::optional<std::size_t> date_col, close_col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = lower(header[i]);
        if (name == "date" && !date_col) date_col = i;
        if (name == "close" && !close_col) close_col = i;
    }
    if (!date_col || !close_col) {
        throw DataError(path.string() + ": header must name 'date' and 'close' columns");
    }

    CsvLoad out;
    out.series.asset_id = std::move(asset_id);
    while (std::getline(in, line)) {
        const auto stripped = util::strip_cr(line);
        if (util::trim(stripped).empty()) continue;
        const auto fields = split_fields(stripped);
        double close = 0.0;
        if (fields.size() <= std::max(*date_col, *close_col) ||
            !util::parse_double(fields[*close_col], close) || !std::isfinite(close) || close <= 0.0) {
            ++out.dropped_rows;
            continue;
        }
        try {
            out.series.rows.push_back({parse_date(fields[*date_col]), close});
        } catch (const DataError&) {
            ++out.dropped_rows;
        }
    }
    if (out.series.rows.empty()) throw DataError(path.string() + ": no valid rows");

    std::ranges::stable_sort(out.series.rows, {}, &PricePoint::date);
    for (std::size_t i = 1; i < out.series.rows.size(); ++i) {
        if (out.series.rows[i].date == out.series.rows[i - 1].date) {
            throw DataError(path.string() + ": duplicate date " + format_date(out.series.rows[i].date));
        }
    }
    return out;
}

void validate(const PriceSeries& series) {
    for (std::size_t i = 0; i < series.rows.size(); ++i) {
        const auto& r = series.rows[i];
        if (!(r.close > 0.0) || !std::isfinite(r.close)) {
            throw DataError(series.asset_id + ": non-positive close on " + format_date(r.date));
        }
        if (i > 0 && !(series.rows[i - 1].date < r.date)) {
            throw DataError(series.asset_id + ": dates not strictly increasing at " + format_date(r.date));
        }
    }
}

ReturnSeries log_returns(const PriceSeries& series, int horizon) {
    if (horizon != 1 && horizon != 5) {
        throw ConfigError("return horizon must be 1 or 5, got " + std::to_string(horizon));
    }
    const auto h = static_cast<std::size_t>(horizon);
    if (series.size() <= h) {
        throw DataError(series.asset_id + ": series of length " + std::to_string(series.size()) +
                        " too short for horizon " + std::to_string(horizon));
    }
    ReturnSeries out{series.asset_id, horizon, {}, {}};
    out.dates.reserve(series.size() - h);
    out.values.reserve(series.size() - h);
    for (std::size_t t = h; t < series.size(); ++t) {
        out.dates.push_back(series.rows[t].date);
        out.values.push_back(std::log(series.rows[t].close / series.rows[t - h].close));
    }
    return out;
}

VolSeries ewma_vol(const ReturnSeries& returns, double decay, std::optional<double> seed_variance) {
    if (!(decay > 0.0 && decay < 1.0)) {
        throw ConfigError("EWMA decay must lie in (0, 1), got " + std::to_string(decay));
    }
    if (returns.values.empty()) throw DataError(returns.asset_id + ": empty return series");

    double var = 0.0;
    if (seed_variance) {
        if (!(*seed_variance >= 0.0)) throw ConfigError("EWMA seed variance must be >= 0");
        var = *seed_variance;
    } else {
        const auto n = std::min(kEwmaSeedWindow, returns.values.size());
        for (std::size_t i = 0; i < n; ++i) var += returns.values[i] * returns.values[i];
        var /= static_cast<double>(n);
    }

    VolSeries out{returns.asset_id, decay, returns.dates, {}};
    out.sigma.reserve(returns.size());
    for (const double r : returns.values) {
        var = decay * var + (1.0 - decay) * r * r;
        out.sigma.push_back(std::sqrt(var));
    }
    return out;
}

ReturnSeries normalize(const ReturnSeries& returns, const VolSeries& vol, HorizonScale scale) {
    const double annualizer = scale == HorizonScale::Daily
                                  ? std::sqrt(kTradingDays)
                                  : std::sqrt(kTradingDays / static_cast<double>(returns.horizon));
    ReturnSeries out{returns.asset_id, returns.horizon, returns.dates, {}};
    out.values.reserve(returns.size());
    std::size_t j = 0;
    for (std::size_t i = 0; i < returns.size(); ++i) {
        const Date d = returns.dates[i];
        while (j < vol.size() && vol.dates[j] < d) ++j;
        if (j == vol.size() || vol.dates[j] != d) {
            throw DataError(returns.asset_id + ": no volatility estimate for " + format_date(d));
        }
        const double r = returns.values[i];
        const double s = vol.sigma[j];
        if (s == 0.0) {
            if (r != 0.0) {
                throw DataError(returns.asset_id + ": degenerate volatility (sigma = 0) on " + format_date(d));
            }
            out.values.push_back(0.0);
        } else {
            out.values.push_back(r / (s * annualizer));
        }
    }
    return out;
}

ModelId model_from_index(int index) {
    if (index < 0 || index > 3) throw ConfigError("model must be 0..3, got " + std::to_string(index));
    return static_cast<ModelId>(index);
}

std::string model_name(ModelId model) {
    return "M" + std::to_string(static_cast<int>(model));
}

std::vector<std::string> required_assets(ModelId model) {
    static const std::vector<std::string> order{std::string(kSp500), std::string(kRussell2000),
                                                std::string(kWti), std::string(kGold)};
    return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(model) + 1};
}

std::string FeatureColumn::name() const {
    return asset_id + "_r" + std::to_string(horizon);
}

FeatureFrame FeatureFrame::slice(std::size_t first, std::size_t last) const {
    FeatureFrame out;
    out.model = model;
    out.columns = columns;
    out.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(first),
                     dates.begin() + static_cast<std::ptrdiff_t>(last));
    out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(first * width()),
                      values.begin() + static_cast<std::ptrdiff_t>(last * width()));
    out.target_returns.assign(target_returns.begin() + static_cast<std::ptrdiff_t>(first),
                              target_returns.begin() + static_cast<std::ptrdiff_t>(last));
    return out;
}

FeatureFrame build_features(ModelId model, const std::map<std::string, PriceSeries>& assets,
                            const FeatureOptions& options) {
    const auto needed = required_assets(model);
    for (const auto& id : needed) {
        if (!assets.contains(id)) throw DataError("model " + model_name(model) + " requires asset '" + id + "'");
    }

    std::vector<ReturnSeries> cols;
    ReturnSeries target;
    for (const auto& id : needed) {
        const auto& prices = assets.at(id);
        validate(prices);
        const auto r1 = log_returns(prices, 1);
        const auto r5 = log_returns(prices, 5);
        const auto vol = ewma_vol(r1, options.decay);
        cols.push_back(normalize(r1, vol, HorizonScale::Daily));
        cols.push_back(normalize(r5, vol, options.five_day_scale));
        if (id == needed.front()) target = r1;
    }

    // Inner join on dates: keep dates present in every column.
    std::map<Date, std::size_t> seen;
    for (const auto& c : cols)
        for (const auto d : c.dates) ++seen[d];

    FeatureFrame frame;
    frame.model = model;
    for (const auto& c : cols) frame.columns.push_back({c.asset_id, c.horizon});

    std::vector<std::unordered_map<std::int64_t, double>> lookup(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) {
        lookup[k].reserve(cols[k].size());
        for (std::size_t i = 0; i < cols[k].size(); ++i) {
            lookup[k].emplace(cols[k].dates[i].time_since_epoch().count(), cols[k].values[i]);
        }
    }
    std::unordered_map<std::int64_t, double> target_by_date;
    for (std::size_t i = 0; i < target.size(); ++i) {
        target_by_date.emplace(target.dates[i].time_since_epoch().count(), target.values[i]);
    }

    for (const auto& [date, count] : seen) {
        if (count != cols.size()) continue;
        const auto key = date.time_since_epoch().count();
        bool finite = std::isfinite(target_by_date.at(key));
        for (const auto& l : lookup) finite = finite && std::isfinite(l.at(key));
        if (!finite) continue;
        frame.dates.push_back(date);
        for (const auto& l : lookup) frame.values.push_back(l.at(key));
        frame.target_returns.push_back(target_by_date.at(key));
    }
    if (frame.dates.empty()) throw DataError("model " + model_name(model) + ": no dates common to all assets");
    return frame;
}

FrameSplit split(const FeatureFrame& frame, const SplitSpec& spec) {
    if (!(spec.train_start < spec.train_end && spec.train_end < spec.test_end)) {
        throw ConfigError("split dates must satisfy train_start < train_end < test_end");
    }
    if (frame.rows() == 0) throw DataError("cannot split an empty frame");
    if (spec.train_end > frame.dates.back()) {
        throw ConfigError("train_end " + format_date(spec.train_end) + " is after the last frame date " +
                          format_date(frame.dates.back()));
    }
    if (spec.train_start < frame.dates.front() && spec.train_end < frame.dates.front()) {
        throw ConfigError("split range lies before the first frame date");
    }
    const auto begin = std::ranges::lower_bound(frame.dates, spec.train_start) - frame.dates.begin();
    const auto mid = std::ranges::upper_bound(frame.dates, spec.train_end) - frame.dates.begin();
    const auto end = std::ranges::upper_bound(frame.dates, spec.test_end) - frame.dates.begin();
    if (mid <= begin) throw DataError("split produces an empty train partition");
    if (end <= mid) throw DataError("split produces an empty test partition");
    return {frame.slice(static_cast<std::size_t>(begin), static_cast<std::size_t>(mid)),
            frame.slice(static_cast<std::size_t>(mid), static_cast<std::size_t>(end))};
}

void write_frame_csv(const FeatureFrame& frame, const std::filesystem::path& path) {
    std::ostringstream os;
    os << "date";
    for (std::size_t j = 0; j < frame.width(); ++j) os << ",f" << j;
    os << ",target_return\n";
    for (std::size_t i = 0; i < frame.rows(); ++i) {
        os << format_date(frame.dates[i]);
        for (const double v : frame.row(i)) os << ',' << util::exact(v);
        os << ',' << util::exact(frame.target_returns[i]) << '\n';
    }
    util::write_file(path, os.str());
}

FeatureFrame read_frame_csv(const std::filesystem::path& path, ModelId model) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read frame file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty frame file " + path.string());
    const auto header = split_fields(util::strip_cr(line));
    if (header.size() < 3 || header.front() != "date" || header.back() != "target_return") {
        throw DataError(path.string() + ": not a feature frame CSV");
    }
    const std::size_t width = header.size() - 2;
    if (width != feature_count(model)) {
        throw DataError(path.string() + ": frame has " + std::to_string(width) + " features, model " +
                        model_name(model) + " expects " + std::to_string(feature_count(model)));
    }
    FeatureFrame frame;
    frame.model = model;
    const auto assets = required_assets(model);
    for (const auto& a : assets) {
        frame.columns.push_back({a, 1});
        frame.columns.push_back({a, 5});
    }
    while (std::getline(in, line)) {
        const auto stripped = util::strip_cr(line);
        if (util::trim(stripped).empty()) continue;
        const auto fields = split_fields(stripped);
        if (fields.size() != header.size()) throw DataError(path.string() + ": ragged row");
        frame.dates.push_back(parse_date(fields[0]));
        for (std::size_t j = 1; j < fields.size(); ++j) {
            double v = 0.0;
            if (!util::parse_double(fields[j], v)) throw DataError(path.string() + ": bad number '" + fields[j] + "'");
            if (j + 1 == fields.size()) {
                frame.target_returns.push_back(v);
            } else {
                frame.values.push_back(v);
            }
        }
    }
    return frame;
}

Regime regime_from_string(std::string_view name) {
    if (name == "trend") return Regime::Trend;
    if (name == "meanrevert") return Regime::MeanRevert;
    if (name == "flat") return Regime::Flat;
    throw ConfigError("unknown regime '" + std::string(name) + "' (trend|meanrevert|flat)");
}

std::string regime_name(Regime regime) {
    switch (regime) {
    case Regime::Trend: return "trend";
    case Regime::MeanRevert: return "meanrevert";
    case Regime::Flat: return "flat";
    }
    return "?";
}

PriceSeries synth_generate(const SynthSpec& spec) {
    if (!(spec.vol >= 0.0)) throw ConfigError("synthetic vol must be >= 0");
    if (spec.n_days < 10) throw ConfigError("synthetic series needs at least 10 days");
    if (!(spec.start_price > 0.0)) throw ConfigError("synthetic start price must be > 0");

    Rng rng = make_stream(spec.seed, Stream::Synthetic);
    PriceSeries out{spec.asset_id, {}};
    out.rows.reserve(spec.n_days);

    Date day = spec.start_date;
    auto next_business_day = [](Date d) {
        do {
            d += std::chrono::days{1};
        } while (std::chrono::weekday{d} == std::chrono::Saturday || std::chrono::weekday{d} == std::chrono::Sunday);
        return d;
    };
    while (std::chrono::weekday{day} == std::chrono::Saturday || std::chrono::weekday{day} == std::chrono::Sunday) {
        day += std::chrono::days{1};
    }

    double log_price = std::log(spec.start_price);
    out.rows.push_back({day, spec.start_price});
    for (std::size_t t = 1; t < spec.n_days; ++t) {
        double r = spec.vol > 0.0 ? spec.vol * standard_normal(rng) : 0.0;
        switch (spec.regime) {
        case Regime::Trend: r += spec.drift; break;
        case Regime::MeanRevert: r += spec.drift + ((t % 2 == 1) ? spec.amplitude : -spec.amplitude); break;
        case Regime::Flat: break;
        }
        log_price += r;
        day = next_business_day(day);
        out.rows.push_back({day, std::exp(log_price)});
    }
    return out;
}

} // namespace ddqn::data

#include <carshare/forecasting.hpp>

#include <carshare/csv.hpp>
#include <carshare/parallel.hpp>
#include <carshare/stats.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace carshare {

namespace {

double clamp_count(double v) { return std::isfinite(v) && v > 0.0 ? v : 0.0; }

std::size_t slot_index(const DemandData& data, std::size_t day, int bin) {
    return day * static_cast<std::size_t>(data.bins()) + static_cast<std::size_t>(bin);
}

void check_test_slot(const DemandData& data, std::size_t day, int bin) {
    if (day >= data.days() || bin < 0 || bin >= data.bins()) {
        throw InvalidArgument("day or bin outside the panel");
    }
}

class BaselineForecaster : public Forecaster {
public:
    BaselineForecaster(Method variant, const DemandData& data) : variant_(variant), data_(&data) {
        const bool use_median = variant == Method::hm || variant == Method::hm_plus;
        const bool pooled = variant == Method::ha_plus || variant == Method::hm_plus;
        if (data.train_days == 0) {
            throw InvalidArgument("baseline needs at least one training day");
        }
        std::size_t weekdays = 0;
        for (std::size_t d = 0; d < data.train_days; ++d) weekdays += data.panel.calendar.is_weekday(d) ? 1 : 0;
        split_ = pooled && weekdays > 0 && weekdays < data.train_days;
        if (pooled && !split_) {
            warnings_.push_back(std::string(to_string(variant)) +
                                ": training days cover only weekdays or only weekends; using the unsplit pool");
        }
        const int bins = data.bins();
        auto summarise = [&](std::size_t cell, int bin, int pool) {
            std::vector<double> values;
            for (std::size_t d = 0; d < data.train_days; ++d) {
                const bool wd = data.panel.calendar.is_weekday(d);
                if (pool == 1 && !wd) continue;
                if (pool == 2 && wd) continue;
                values.push_back(data.panel.at(cell, d, bin));
            }
            return use_median ? stats::median(values) : stats::mean(values);
        };
        table_.resize(data.panel.cells.size());
        for (std::size_t cell : data.cells) {
            auto& t = table_[cell];
            t.assign(3 * static_cast<std::size_t>(bins), 0.0);
            for (int b = 0; b < bins; ++b) {
                t[static_cast<std::size_t>(b)] = summarise(cell, b, 0);
                if (split_) {
                    t[static_cast<std::size_t>(bins + b)] = summarise(cell, b, 1);
                    t[static_cast<std::size_t>(2 * bins + b)] = summarise(cell, b, 2);
                }
            }
        }
    }

    Method method() const override { return variant_; }

    double predict(std::size_t cell, std::size_t day, int bin) const override {
        check_test_slot(*data_, day, bin);
        const auto& t = table_.at(cell);
        if (t.empty()) {
            throw InvalidArgument("cell is not modelled");
        }
        int pool = 0;
        if (split_) pool = data_->panel.calendar.is_weekday(day) ? 1 : 2;
        return clamp_count(t[static_cast<std::size_t>(pool * data_->bins() + bin)]);
    }

private:
    Method variant_;
    const DemandData* data_;
    bool split_ = false;
    std::vector<std::vector<double>> table_;  // per panel cell: [all | weekday | weekend] x bins
};

class SarimaForecaster : public Forecaster {
public:
    SarimaForecaster(const DemandData& data, const SarimaOptions& options)
        : data_(&data), fallback_(fit_baseline(Method::ha, data)) {
        const int bins = data.bins();
        const std::size_t horizon = data.test_days() * static_cast<std::size_t>(bins);
        forecasts_.resize(data.panel.cells.size());
        orders_.resize(data.panel.cells.size());
        std::vector<std::string> notes(data.cells.size());
        parallel_for(data.cells.size(), [&](std::size_t k) {
            const std::size_t cell = data.cells[k];
            const auto& counts = data.panel.counts[cell];
            const std::span<const double> train(counts.data(), data.train_days * static_cast<std::size_t>(bins));
            try {
                SarimaSelection sel = fit_sarima(train, bins, options);
                forecasts_[cell] = sel.model.forecast(horizon);
                orders_[cell] = sel.model.order();
            } catch (const Error& e) {
                notes[k] = "SARIMA fell back to HA for cell " + std::to_string(cell) + ": " + e.what();
            }
        });
        for (auto& n : notes) {
            if (!n.empty()) warnings_.push_back(std::move(n));
        }
    }

    Method method() const override { return Method::sarima; }

    double predict(std::size_t cell, std::size_t day, int bin) const override {
        check_test_slot(*data_, day, bin);
        const auto& f = forecasts_.at(cell);
        if (f.empty() || day < data_->train_days) {
            return fallback_->predict(cell, day, bin);
        }
        return clamp_count(f[(day - data_->train_days) * static_cast<std::size_t>(data_->bins()) +
                             static_cast<std::size_t>(bin)]);
    }

    const std::optional<SarimaOrder>& order(std::size_t cell) const { return orders_.at(cell); }

private:
    const DemandData* data_;
    std::unique_ptr<Forecaster> fallback_;
    std::vector<std::vector<double>> forecasts_;
    std::vector<std::optional<SarimaOrder>> orders_;
};

// Training rows of one cell in (day, bin) order.
struct CellRows {
    Eigen::MatrixXd x;
    std::vector<double> y;
    std::vector<std::size_t> day;
};

CellRows training_rows(const DemandData& data, std::size_t cell) {
    const int bins = data.bins();
    const auto n = static_cast<Eigen::Index>(data.train_days * static_cast<std::size_t>(bins));
    CellRows rows;
    rows.x.resize(n, kFeatureCount);
    Eigen::Index i = 0;
    for (std::size_t d = 0; d < data.train_days; ++d) {
        for (int b = 0; b < bins; ++b, ++i) {
            const auto f = feature_vector(data, cell, d, b);
            for (int j = 0; j < kFeatureCount; ++j) rows.x(i, j) = f[static_cast<std::size_t>(j)];
            rows.y.push_back(data.panel.at(cell, d, b));
            rows.day.push_back(d);
        }
    }
    return rows;
}

std::vector<int> fold_ids(const CellRows& rows, std::size_t train_days, int folds, bool random, std::uint64_t seed) {
    std::vector<int> out(rows.y.size());
    if (random) {
        std::vector<std::size_t> idx(rows.y.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::mt19937_64 rng(seed);
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t i = 0; i < idx.size(); ++i) out[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(folds));
    } else {
        for (std::size_t i = 0; i < rows.y.size(); ++i) {
            out[i] = static_cast<int>(rows.day[i] * static_cast<std::size_t>(folds) / train_days);
        }
    }
    return out;
}

template <typename Fit>
double cv_mse(const CellRows& rows, const std::vector<int>& folds, int n_folds, Fit fit) {
    double total = 0.0;
    std::size_t count = 0;
    for (int f = 0; f < n_folds; ++f) {
        std::vector<Eigen::Index> train, test;
        for (std::size_t i = 0; i < folds.size(); ++i) (folds[i] == f ? test : train).push_back(static_cast<Eigen::Index>(i));
        if (test.empty() || train.empty()) continue;
        Eigen::MatrixXd xt(static_cast<Eigen::Index>(train.size()), rows.x.cols());
        std::vector<double> yt;
        for (std::size_t i = 0; i < train.size(); ++i) {
            xt.row(static_cast<Eigen::Index>(i)) = rows.x.row(train[i]);
            yt.push_back(rows.y[static_cast<std::size_t>(train[i])]);
        }
        Eigen::MatrixXd xv(static_cast<Eigen::Index>(test.size()), rows.x.cols());
        for (std::size_t i = 0; i < test.size(); ++i) xv.row(static_cast<Eigen::Index>(i)) = rows.x.row(test[i]);
        const std::vector<double> pred = fit(xt, yt, xv);
        for (std::size_t i = 0; i < test.size(); ++i) {
            const double d = clamp_count(pred[i]) - rows.y[static_cast<std::size_t>(test[i])];
            total += d * d;
        }
        count += test.size();
    }
    return count ? total / static_cast<double>(count) : std::numeric_limits<double>::infinity();
}

int cv_folds_for(const DemandData& data, const ForecastOptions& o) {
    return std::max(2, std::min<int>(o.cv_folds, static_cast<int>(data.train_days)));
}

class ForestForecaster : public Forecaster {
public:
    ForestForecaster(const DemandData& data, const ForecastOptions& options) : data_(&data) {
        models_.resize(data.panel.cells.size());
        mtry_.assign(data.panel.cells.size(), 0);
        const int folds = cv_folds_for(data, options);
        parallel_for(data.cells.size(), [&](std::size_t k) {
            const std::size_t cell = data.cells[k];
            const CellRows rows = training_rows(data, cell);
            const std::uint64_t seed = stats::mix_seed(options.seed, cell);
            const auto ids = fold_ids(rows, data.train_days, folds, options.random_folds, seed);
            int best_m = options.mtry_candidates.empty() ? 0 : options.mtry_candidates.front();
            double best = std::numeric_limits<double>::infinity();
            if (options.mtry_candidates.size() > 1) {
                for (int m : options.mtry_candidates) {
                    ForestOptions fo = options.forest;
                    fo.mtry = m;
                    fo.seed = seed;
                    const double err = cv_mse(rows, ids, folds, [&](const auto& xt, const auto& yt, const auto& xv) {
                        return RandomForest::fit(xt, yt, fo).predict(xv);
                    });
                    if (err < best) {
                        best = err;
                        best_m = m;
                    }
                }
            }
            ForestOptions fo = options.forest;
            fo.mtry = best_m;
            fo.seed = seed;
            models_[cell] = std::make_unique<RandomForest>(RandomForest::fit(rows.x, rows.y, fo));
            mtry_[cell] = best_m;
        });
    }

    Method method() const override { return Method::rf; }

    double predict(std::size_t cell, std::size_t day, int bin) const override {
        check_test_slot(*data_, day, bin);
        const auto& m = models_.at(cell);
        if (!m) throw InvalidArgument("cell is not modelled");
        const auto f = feature_vector(*data_, cell, day, bin);
        return clamp_count(m->predict(f));
    }

private:
    const DemandData* data_;
    std::vector<std::unique_ptr<RandomForest>> models_;
    std::vector<int> mtry_;
};

class MlpForecaster : public Forecaster {
public:
    MlpForecaster(const DemandData& data, const ForecastOptions& options)
        : data_(&data), fallback_(fit_baseline(Method::ha, data)) {
        models_.resize(data.panel.cells.size());
        const int folds = cv_folds_for(data, options);
        std::vector<std::string> notes(data.cells.size());
        parallel_for(data.cells.size(), [&](std::size_t k) {
            const std::size_t cell = data.cells[k];
            const CellRows rows = training_rows(data, cell);
            const std::uint64_t seed = stats::mix_seed(options.seed, cell);
            const auto ids = fold_ids(rows, data.train_days, folds, options.random_folds, seed);
            MlpOptions mo = options.mlp;
            mo.seed = seed;
            try {
                if (options.hidden_candidates.size() > 1) {
                    double best = std::numeric_limits<double>::infinity();
                    for (int h : options.hidden_candidates) {
                        MlpOptions trial = mo;
                        trial.hidden = h;
                        const double err = cv_mse(rows, ids, folds, [&](const auto& xt, const auto& yt, const auto& xv) {
                            return Mlp::fit(xt, yt, trial).predict(xv);
                        });
                        if (err < best) {
                            best = err;
                            mo.hidden = h;
                        }
                    }
                } else if (!options.hidden_candidates.empty()) {
                    mo.hidden = options.hidden_candidates.front();
                }
                models_[cell] = std::make_unique<Mlp>(Mlp::fit(rows.x, rows.y, mo));
            } catch (const Error& e) {
                notes[k] = "MLP fell back to HA for cell " + std::to_string(cell) + ": " + e.what();
            }
        });
        for (auto& n : notes) {
            if (!n.empty()) warnings_.push_back(std::move(n));
        }
    }

    Method method() const override { return Method::mlp; }

    double predict(std::size_t cell, std::size_t day, int bin) const override {
        check_test_slot(*data_, day, bin);
        const auto& m = models_.at(cell);
        if (!m) return fallback_->predict(cell, day, bin);
        const auto f = feature_vector(*data_, cell, day, bin);
        return clamp_count(m->predict(f));
    }

private:
    const DemandData* data_;
    std::unique_ptr<Forecaster> fallback_;
    std::vector<std::unique_ptr<Mlp>> models_;
};

}  // namespace

DaySplit split_days(std::vector<std::chrono::sys_days> days, const SplitSpec& spec) {
    std::sort(days.begin(), days.end());
    days.erase(std::unique(days.begin(), days.end()), days.end());
    if (days.size() < spec.min_days) {
        throw InvalidArgument("split needs at least " + std::to_string(spec.min_days) + " days, got " +
                              std::to_string(days.size()));
    }
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw InvalidArgument("train fraction must lie strictly between 0 and 1");
    }
    const auto n_train =
        static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(days.size()) + 1e-9));
    if (n_train == 0 || n_train >= days.size()) {
        throw InvalidArgument("split leaves no training or no test days");
    }
    DaySplit out;
    out.train.assign(days.begin(), days.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(days.begin() + static_cast<std::ptrdiff_t>(n_train), days.end());
    return out;
}

std::string_view to_string(Method m) {
    switch (m) {
        case Method::ha: return "HA";
        case Method::hm: return "HM";
        case Method::ha_plus: return "HA+";
        case Method::hm_plus: return "HM+";
        case Method::sarima: return "SARIMA";
        case Method::rf: return "RF";
        case Method::mlp: return "MLP";
        case Method::weikl: return "WEIKL";
    }
    return "?";
}

std::optional<Method> parse_method(std::string_view text) {
    std::string s(text);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "arima") return Method::sarima;
    if (s == "nn") return Method::mlp;
    for (Method m : kAllMethods) {
        std::string name(to_string(m));
        std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
        if (name == s) return m;
    }
    return std::nullopt;
}

DemandData make_demand_data(const EventPanel& panel, const Grid& grid, std::span<const double> activity,
                            const SplitSpec& split, double min_events, int hops) {
    if (activity.size() != panel.cells.size()) {
        throw InvalidArgument("activity totals do not match the panel cells");
    }
    DemandData data;
    data.panel = panel;
    data.neighbor_avg = neighbour_averages(panel, grid, hops);
    data.train_days = split_days(panel.calendar.days(), split).train.size();
    for (std::size_t i = 0; i < panel.cells.size(); ++i) {
        if (activity[i] > min_events) data.cells.push_back(i);
    }
    return data;
}

std::array<double, kFeatureCount> feature_vector(const DemandData& data, std::size_t cell, std::size_t day, int bin) {
    std::array<double, kFeatureCount> f{};
    f[0] = bin;
    const int dow = data.panel.calendar.day_of_week(day);
    if (dow >= 1) f[static_cast<std::size_t>(dow)] = 1.0;  // Monday..Saturday in slots 1..6
    f[7] = data.panel.calendar.is_weekday(day) ? 1.0 : 0.0;
    f[8] = data.neighbor_avg.at(cell)[slot_index(data, day, bin)];
    return f;
}

std::unique_ptr<Forecaster> fit_baseline(Method variant, const DemandData& data) {
    if (variant != Method::ha && variant != Method::hm && variant != Method::ha_plus && variant != Method::hm_plus) {
        throw InvalidArgument("not a baseline method");
    }
    return std::make_unique<BaselineForecaster>(variant, data);
}

WeiklForecaster::WeiklForecaster(const DemandData& data, const GapOptions& gap) : data_(&data) {
    if (data.train_days < 2) {
        throw InvalidArgument("WEIKL needs at least two training days");
    }
    const int bins = data.bins();
    const auto n_cells = static_cast<Eigen::Index>(data.cells.size());
    const auto n_days = static_cast<Eigen::Index>(data.train_days);
    column_.assign(data.panel.cells.size(), -1);
    for (std::size_t k = 0; k < data.cells.size(); ++k) column_[data.cells[k]] = static_cast<int>(k);

    auto slot_matrix = [&](int bin) {
        Eigen::MatrixXd m(n_days, n_cells);
        for (Eigen::Index d = 0; d < n_days; ++d)
            for (Eigen::Index c = 0; c < n_cells; ++c)
                m(d, c) = data.panel.at(data.cells[static_cast<std::size_t>(c)], static_cast<std::size_t>(d), bin);
        return m;
    };

    slots_.resize(static_cast<std::size_t>(bins));
    std::vector<Eigen::MatrixXd> matrices(static_cast<std::size_t>(bins));
    parallel_for(static_cast<std::size_t>(bins), [&](std::size_t t) {
        Slot& slot = slots_[t];
        matrices[t] = slot_matrix(static_cast<int>(t));
        slot.pca = fit_pca(matrices[t], 2);
        const Eigen::MatrixXd scores = slot.pca.project(matrices[t]);
        GapOptions g = gap;
        g.kmeans.seed = stats::mix_seed(gap.kmeans.seed, t);
        const int k = gap_statistic(scores, g).k;
        KMeansOptions ko = g.kmeans;
        slot.groups = kmeans(scores, k, ko);
        slot.day_group = slot.groups.labels;
        slot.train_mean.resize(static_cast<std::size_t>(n_cells));
        for (Eigen::Index c = 0; c < n_cells; ++c) slot.train_mean[static_cast<std::size_t>(c)] = matrices[t].col(c).mean();
    });

    // Transitions from slot t to the next one (the next day's first slot after the last).
    for (int t = 0; t < bins; ++t) {
        Slot& slot = slots_[static_cast<std::size_t>(t)];
        const int next = (t + 1) % bins;
        const int day_shift = t + 1 == bins ? 1 : 0;
        const auto& next_slot = slots_[static_cast<std::size_t>(next)];
        const auto k = static_cast<std::size_t>(slot.groups.centroids.rows());
        const auto k_next = static_cast<std::size_t>(next_slot.groups.centroids.rows());
        slot.from_to.assign(k, std::vector<double>(k_next, 0.0));
        slot.variation.assign(k, std::vector<double>(static_cast<std::size_t>(n_cells), 0.0));
        std::vector<double> members(k, 0.0);
        for (Eigen::Index d = 0; d + day_shift < n_days; ++d) {
            const auto g = static_cast<std::size_t>(slot.day_group[static_cast<std::size_t>(d)]);
            const auto h = static_cast<std::size_t>(next_slot.day_group[static_cast<std::size_t>(d + day_shift)]);
            slot.from_to[g][h] += 1.0;
            members[g] += 1.0;
            for (Eigen::Index c = 0; c < n_cells; ++c) {
                slot.variation[g][static_cast<std::size_t>(c)] +=
                    matrices[static_cast<std::size_t>(next)](d + day_shift, c) - matrices[static_cast<std::size_t>(t)](d, c);
            }
        }
        for (std::size_t g = 0; g < k; ++g) {
            if (members[g] > 0.0) {
                for (double& v : slot.from_to[g]) v /= members[g];
                for (double& v : slot.variation[g]) v /= members[g];
            } else {
                std::fill(slot.from_to[g].begin(), slot.from_to[g].end(), 1.0 / static_cast<double>(k_next));
            }
        }
    }
}

double WeiklForecaster::predict(std::size_t cell, std::size_t day, int bin) const {
    check_test_slot(*data_, day, bin);
    const int column = column_.at(cell);
    if (column < 0) {
        throw InvalidArgument("cell is not modelled");
    }
    const int bins = data_->bins();
    if (day == 0 && bin == 0) {
        return clamp_count(slots_[0].train_mean[static_cast<std::size_t>(column)]);
    }
    const std::size_t src_day = bin == 0 ? day - 1 : day;
    const int src_bin = bin == 0 ? bins - 1 : bin - 1;
    const Slot& slot = slots_[static_cast<std::size_t>(src_bin)];
    Eigen::MatrixXd observed(1, static_cast<Eigen::Index>(data_->cells.size()));
    for (std::size_t k = 0; k < data_->cells.size(); ++k) {
        observed(0, static_cast<Eigen::Index>(k)) = data_->panel.at(data_->cells[k], src_day, src_bin);
    }
    const Eigen::RowVectorXd score = slot.pca.project(observed).row(0);
    Eigen::Index group = 0;
    (slot.groups.centroids.rowwise() - score).rowwise().squaredNorm().minCoeff(&group);
    const double base = observed(0, column);
    return clamp_count(base + slot.variation[static_cast<std::size_t>(group)][static_cast<std::size_t>(column)]);
}

std::unique_ptr<Forecaster> fit_forecaster(Method method, const DemandData& data, const ForecastOptions& options) {
    if (data.train_days == 0 || data.train_days >= data.days()) {
        throw InvalidArgument("demand data needs both training and test days");
    }
    switch (method) {
        case Method::ha:
        case Method::hm:
        case Method::ha_plus:
        case Method::hm_plus: return fit_baseline(method, data);
        case Method::sarima: return std::make_unique<SarimaForecaster>(data, options.sarima);
        case Method::rf: return std::make_unique<ForestForecaster>(data, options);
        case Method::mlp: return std::make_unique<MlpForecaster>(data, options);
        case Method::weikl: {
            GapOptions gap = options.gap;
            gap.kmeans.seed = stats::mix_seed(options.seed, 0x77);
            return std::make_unique<WeiklForecaster>(data, gap);
        }
    }
    throw InvalidArgument("unknown forecasting method");
}

double evaluate_cell(const Forecaster& f, const DemandData& data, std::size_t cell) {
    std::vector<double> pred, obs;
    for (std::size_t d = data.train_days; d < data.days(); ++d) {
        for (int b = 0; b < data.bins(); ++b) {
            pred.push_back(f.predict(cell, d, b));
            obs.push_back(data.panel.at(cell, d, b));
        }
    }
    return stats::rmse(pred, obs);
}

std::vector<Method> Comparison::best_per_cell() const {
    std::vector<Method> out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        std::size_t best = 0;
        for (std::size_t m = 1; m < methods.size(); ++m) {
            if (rmse[m][c] < rmse[best][c]) best = m;
        }
        out.push_back(methods[best]);
    }
    return out;
}

double Comparison::median_rmse(Method m) const {
    auto it = std::find(methods.begin(), methods.end(), m);
    if (it == methods.end()) {
        throw InvalidArgument("method not part of the comparison");
    }
    return stats::median(rmse[static_cast<std::size_t>(it - methods.begin())]);
}

Comparison compare_forecasters(const DemandData& data, const std::vector<Method>& methods,
                               const ForecastOptions& options) {
    if (data.cells.empty()) {
        throw InvalidArgument("no cell passes the activity filter");
    }
    Comparison c;
    c.methods = methods;
    c.cells = data.cells;
    for (Method m : methods) {
        c.models.push_back(fit_forecaster(m, data, options));
        std::vector<double> scores;
        for (std::size_t cell : data.cells) scores.push_back(evaluate_cell(*c.models.back(), data, cell));
        c.rmse.push_back(std::move(scores));
    }
    return c;
}

void write_rmse_csv(std::ostream& out, const Comparison& c, const DemandData& data) {
    csv::Writer w(out);
    std::vector<std::string> header{"row", "col"};
    for (Method m : c.methods) header.emplace_back(to_string(m));
    w.row(header);
    for (std::size_t k = 0; k < c.cells.size(); ++k) {
        const CellId id = data.panel.cells[c.cells[k]];
        std::vector<std::string> row{std::to_string(id.row), std::to_string(id.col)};
        for (std::size_t m = 0; m < c.methods.size(); ++m) row.push_back(csv::num(c.rmse[m][k]));
        w.row(row);
    }
}

void write_best_method_csv(std::ostream& out, const Comparison& c, const DemandData& data) {
    csv::Writer w(out);
    w.row({"row", "col", "best_method"});
    const auto best = c.best_per_cell();
    for (std::size_t k = 0; k < c.cells.size(); ++k) {
        const CellId id = data.panel.cells[c.cells[k]];
        w.row({std::to_string(id.row), std::to_string(id.col), std::string(to_string(best[k]))});
    }
}

nlohmann::json comparison_summary(const Comparison& c) {
    nlohmann::json methods = nlohmann::json::object();
    for (std::size_t m = 0; m < c.methods.size(); ++m) {
        const auto& v = c.rmse[m];
        methods[std::string(to_string(c.methods[m]))] = {
            {"min", *std::min_element(v.begin(), v.end())}, {"q1", stats::quantile(v, 0.25)},
            {"median", stats::median(v)},                   {"q3", stats::quantile(v, 0.75)},
            {"max", *std::max_element(v.begin(), v.end())}, {"mean", stats::mean(v)},
            {"warnings", c.models[m]->warnings()}};
    }
    nlohmann::json counts = nlohmann::json::object();
    for (Method m : c.methods) counts[std::string(to_string(m))] = 0;
    for (Method m : c.best_per_cell()) counts[std::string(to_string(m))] = counts[std::string(to_string(m))].get<int>() + 1;
    return {{"cells", c.cells.size()}, {"rmse", methods}, {"best_method_counts", counts}};
}

void write_tagged_series_csv(std::ostream& out, const Comparison& c, const DemandData& data, std::size_t cell) {
    csv::Writer w(out);
    std::vector<std::string> header{"date", "bin", "observed"};
    for (Method m : c.methods) header.emplace_back(to_string(m));
    w.row(header);
    for (std::size_t d = data.train_days; d < data.days(); ++d) {
        const std::string date = format_date(std::chrono::year_month_day(data.panel.calendar.day(d)));
        for (int b = 0; b < data.bins(); ++b) {
            std::vector<std::string> row{date, std::to_string(b), csv::num(data.panel.at(cell, d, b))};
            for (const auto& model : c.models) row.push_back(csv::num(model->predict(cell, d, b)));
            w.row(row);
        }
    }
}

std::vector<BalanceRow> balance(const std::vector<CellId>& cells, std::span<const double> vehicles,
                                std::span<const double> pickups, std::span<const double> dropoffs) {
    if (vehicles.size() != cells.size() || pickups.size() != cells.size() || dropoffs.size() != cells.size()) {
        throw InvalidArgument("balance inputs must be aligned on the same cells");
    }
    std::vector<BalanceRow> out;
    out.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        out.push_back({cells[i], vehicles[i], dropoffs[i], pickups[i],
                       expected_balance(vehicles[i], dropoffs[i], pickups[i])});
    }
    return out;
}

void write_balance_csv(std::ostream& out, const std::vector<BalanceRow>& rows) {
    csv::Writer w(out);
    w.row({"row", "col", "vehicles", "forecast_dropoffs", "forecast_pickups", "balance"});
    for (const auto& r : rows) {
        w.row({std::to_string(r.cell.row), std::to_string(r.cell.col), csv::num(r.vehicles), csv::num(r.dropoffs),
               csv::num(r.pickups), csv::num(r.balance)});
    }
}

}  // namespace carshare

#include <carshare/forecasting.hpp>
#include <carshare/stats.hpp>

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

using namespace carshare;
using namespace std::chrono;

namespace {

const sys_days kMonday = sys_days(year{2016} / 10 / 3);

/// Single-panel demand data with `cells` cells filled by f(cell, day, bin).
template <class F>
DemandData make_data(std::size_t cells, std::size_t days, std::size_t train, int bin_minutes, F f) {
    DemandData d;
    d.panel.bin_minutes = bin_minutes;
    std::vector<sys_days> cal;
    for (std::size_t i = 0; i < days; ++i) cal.push_back(kMonday + sys_days::duration(i));
    d.panel.calendar = Calendar(cal);
    const int bins = d.panel.bins_per_day();
    for (std::size_t c = 0; c < cells; ++c) {
        d.panel.cells.push_back({0, static_cast<int>(c)});
        std::vector<double> v;
        for (std::size_t day = 0; day < days; ++day)
            for (int b = 0; b < bins; ++b) v.push_back(f(c, day, b));
        d.panel.counts.push_back(std::move(v));
        d.cells.push_back(c);
    }
    d.neighbor_avg.assign(cells, std::vector<double>(days * static_cast<std::size_t>(bins), 0.0));
    d.train_days = train;
    return d;
}

}  // namespace

TEST_SUITE("forecasting") {

TEST_CASE("temporal split") {
    std::vector<sys_days> days;
    for (int i = 0; i < 45; ++i) days.push_back(kMonday + sys_days::duration(i));
    const auto s = split_days(days);
    CHECK(s.train.size() == 36);
    CHECK(s.test.size() == 9);
    CHECK(s.train.back() < s.test.front());

    auto shuffled = days;
    std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(9));
    const auto s2 = split_days(shuffled);
    CHECK(s2.train == s.train);
    CHECK(s2.test == s.test);

    const auto five = split_days(std::vector<sys_days>(days.begin(), days.begin() + 5));
    CHECK(five.train.size() == 4);
    CHECK(five.test.size() == 1);
    CHECK_THROWS_AS(split_days(std::vector<sys_days>(days.begin(), days.begin() + 4)), InvalidArgument);
}

TEST_CASE("method names") {
    for (const Method m : kAllMethods) CHECK(parse_method(to_string(m)) == m);
    CHECK(parse_method("arima") == Method::sarima);
    CHECK(parse_method("nn") == Method::mlp);
    CHECK_FALSE(parse_method("xyz").has_value());
}

TEST_CASE("historical average and median") {
    const auto flat = make_data(1, 10, 8, 60, [](auto, auto, auto) { return 3.0; });
    for (const Method m : {Method::ha, Method::hm, Method::ha_plus, Method::hm_plus}) {
        const auto f = fit_baseline(m, flat);
        for (int b = 0; b < 24; ++b) CHECK(f->predict(0, 9, b) == 3.0);
    }
    const auto spike = make_data(1, 5, 4, 60, [](auto, std::size_t day, int b) { return day == 3 && b == 7 ? 9.0 : 0.0; });
    CHECK(fit_baseline(Method::ha, spike)->predict(0, 4, 7) == doctest::Approx(2.25));
    CHECK(fit_baseline(Method::hm, spike)->predict(0, 4, 7) == 0.0);
}

TEST_CASE("pooled average splits weekdays and weekends") {
    const auto d = make_data(1, 21, 14, 60, [](auto, std::size_t day, auto) { return is_weekday(kMonday + sys_days::duration(day)) ? 4.0 : 1.0; });
    const auto f = fit_baseline(Method::ha_plus, d);
    CHECK(f->predict(0, 14, 5) == 4.0);  // Monday
    CHECK(f->predict(0, 20, 5) == 1.0);  // Sunday
    CHECK(fit_baseline(Method::ha, d)->predict(0, 14, 5) == doctest::Approx((10 * 4.0 + 4 * 1.0) / 14.0));
}

TEST_CASE("baseline is invariant under training day permutation") {
    std::mt19937_64 rng(2);
    std::poisson_distribution<int> pois(3.0);
    std::vector<double> raw(10 * 24);
    for (auto& v : raw) v = pois(rng);
    const auto a = make_data(1, 10, 8, 60, [&](auto, std::size_t day, int b) { return raw[day * 24 + b]; });
    const auto b = make_data(1, 10, 8, 60, [&](auto, std::size_t day, int bin) {
        const std::size_t src = day < 8 ? 7 - day : day;
        return raw[src * 24 + bin];
    });
    for (const Method m : {Method::ha, Method::hm}) {
        for (int bin = 0; bin < 24; ++bin) CHECK(fit_baseline(m, a)->predict(0, 8, bin) == fit_baseline(m, b)->predict(0, 8, bin));
    }
}

TEST_CASE("sarima on white noise forecasts the mean") {
    int close = 0;
    for (int seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(static_cast<std::uint64_t>(seed) * 31 + 7);
        std::normal_distribution<double> n(5.0, 1.0);
        std::vector<double> y(240);
        for (auto& v : y) v = n(rng);
        const auto f = fit_sarima(y, 24).model.forecast(24);
        const double se = stats::stddev(y) / std::sqrt(static_cast<double>(y.size()));
        close += std::abs(stats::mean(f) - stats::mean(y)) < 2.0 * se;
    }
    CHECK(close >= 18);
}

TEST_CASE("sarima reproduces a pure seasonal pattern") {
    std::vector<double> pattern(24);
    for (int i = 0; i < 24; ++i) pattern[i] = 5.0 + 3.0 * std::sin(2 * M_PI * i / 24.0) + (i % 5);
    std::vector<double> y;
    for (int d = 0; d < 5; ++d) y.insert(y.end(), pattern.begin(), pattern.end());
    const auto f = fit_sarima(y, 24).model.forecast(24);
    CHECK(stats::rmse(f, pattern) < 1e-3);
}

TEST_CASE("sarima rejects short series") {
    const std::vector<double> y(48, 1.0);
    CHECK_THROWS_AS(fit_sarima(y, 24), InvalidArgument);
}

TEST_CASE("differencing polynomial") {
    const auto p = differencing_polynomial(1, 1, 4);
    const std::vector<double> want{1, -1, 0, 0, -1, 1};
    CHECK(p == want);
}

TEST_CASE("random forest") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    const int n = 300;
    Eigen::MatrixXd x(n, 3);
    std::vector<double> y(n), five(n, 5.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < 3; ++j) x(i, j) = u(rng);
        y[i] = x(i, 0);
    }
    ForestOptions opt;
    opt.trees = 100;
    opt.mtry = 3;
    opt.seed = 3;
    const auto rf = RandomForest::fit(x, y, opt);
    CHECK(stats::rmse(rf.predict(x), y) < 0.1 * stats::stddev(y));

    const auto flat = RandomForest::fit(x, five, opt);
    for (double p : flat.predict(x)) CHECK(p == doctest::Approx(5.0));

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Eigen::MatrixXd xp(n, 3);
    std::vector<double> yp(n);
    for (int i = 0; i < n; ++i) {
        xp.row(i) = x.row(order[i]);
        yp[i] = y[order[i]];
    }
    CHECK(RandomForest::fit(xp, yp, opt).predict(x) == rf.predict(x));
    CHECK(RandomForest::fit(x, y, opt).predict(x) == rf.predict(x));
}

TEST_CASE("mlp") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = 400;
    Eigen::MatrixXd x(n, 1), xt(100, 1);
    std::vector<double> y(n), yt(100), c(n, 7.0);
    for (int i = 0; i < n; ++i) {
        x(i, 0) = u(rng);
        y[i] = 2.0 * x(i, 0);
    }
    for (int i = 0; i < 100; ++i) {
        xt(i, 0) = u(rng);
        yt[i] = 2.0 * xt(i, 0);
    }
    MlpOptions opt;
    opt.hidden = 1;
    const auto m = Mlp::fit(x, y, opt);
    CHECK(stats::rmse(m.predict(xt), yt) < 0.05 * stats::stddev(yt));

    const auto flat = Mlp::fit(x, c, opt);
    for (double p : flat.predict(xt)) CHECK(p == doctest::Approx(7.0));

    CHECK(Mlp::fit(x, y, opt).predict(xt) == m.predict(xt));
}

TEST_CASE("scaler round trip") {
    Eigen::MatrixXd x(4, 3);
    x << 1, 5, -2, 2, 5, 7, 3.5, 5, 0.25, -8, 5, 11;
    const auto s = MinMaxScaler::fit(x);
    const Eigen::MatrixXd z = s.transform(x);
    CHECK(z.col(0).maxCoeff() == doctest::Approx(1.0));
    CHECK(z.col(0).minCoeff() == doctest::Approx(-1.0));
    CHECK(z.col(1).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::MatrixXd back = s.inverse(z);
    CHECK((back.col(0) - x.col(0)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((back.col(2) - x.col(2)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(s.inverse(s.transform(4.2, 2), 2) - 4.2) < 1e-9);
}

TEST_CASE("weikl with identical days") {
    const auto d = make_data(6, 12, 10, 120, [](std::size_t c, auto, int b) { return static_cast<double>((c + 1) * (b % 4)); });
    const WeiklForecaster w(d, {});
    for (const auto& s : w.slots()) CHECK(s.groups.centroids.rows() == 1);
    for (std::size_t c = 0; c < 6; ++c)
        for (int b = 0; b < 12; ++b) CHECK(w.predict(c, 10, b) == doctest::Approx((c + 1) * (b % 4)).epsilon(1e-9));
}

TEST_CASE("weikl finds two day regimes") {
    std::mt19937_64 rng(12);
    std::bernoulli_distribution high(0.5);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::vector<bool> regime(40);
    for (std::size_t i = 0; i < regime.size(); ++i) regime[i] = i % 7 == 0 ? true : i % 7 == 1 ? false : high(rng);
    std::vector<double> cell_noise(8 * 40 * 6);
    for (auto& v : cell_noise) v = noise(rng);
    const auto d = make_data(8, 40, 32, 240, [&](std::size_t c, std::size_t day, int b) {
        return (regime[day] ? 12.0 : 3.0) + cell_noise[(c * 40 + day) * 6 + static_cast<std::size_t>(b)];
    });
    const WeiklForecaster w(d, {});
    for (std::size_t t = 0; t < w.slots().size(); ++t) {
        const auto& s = w.slots()[t];
        REQUIRE(s.groups.centroids.rows() == 2);
        REQUIRE(s.from_to.size() == 2);
        if (t + 1 == w.slots().size()) break;  // wraps to the next day
        for (const auto& row : s.from_to) CHECK(*std::max_element(row.begin(), row.end()) > 0.9);
    }
}

TEST_CASE("rmse evaluation") {
    const auto same = make_data(1, 10, 8, 60, [](auto, auto, int b) { return static_cast<double>(b % 3); });
    CHECK(evaluate_cell(*fit_baseline(Method::ha, same), same, 0) == 0.0);
    const auto jump = make_data(1, 10, 8, 60, [](auto, std::size_t day, auto) { return day < 8 ? 0.0 : 1.0; });
    CHECK(evaluate_cell(*fit_baseline(Method::ha, jump), jump, 0) == doctest::Approx(1.0));
}

TEST_CASE("forecasts are finite and non-negative") {
    std::mt19937_64 rng(6);
    std::poisson_distribution<int> pois(1.0);
    std::vector<double> raw(3 * 14 * 12);
    for (auto& v : raw) v = pois(rng);
    const auto d = make_data(3, 14, 11, 120, [&](std::size_t c, std::size_t day, int b) { return raw[(c * 14 + day) * 12 + b]; });
    ForecastOptions opt;
    opt.forest.trees = 20;
    opt.mlp.max_epochs = 50;
    opt.hidden_candidates = {3};
    opt.mtry_candidates = {2};
    opt.cv_folds = 2;
    for (const Method m : kAllMethods) {
        const auto f = fit_forecaster(m, d, opt);
        for (std::size_t day = 11; day < 14; ++day)
            for (int b = 0; b < 12; ++b) {
                const double p = f->predict(1, day, b);
                CHECK(std::isfinite(p));
                CHECK(p >= 0.0);
            }
    }
}

TEST_CASE("balance") {
    CHECK(expected_balance(3, 1, 2) == 2.0);
    CHECK(expected_balance(5, 0, 0) == 5.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    std::vector<CellId> cells;
    std::vector<double> v, p, dr;
    for (int i = 0; i < 20; ++i) {
        cells.push_back({i, 0});
        v.push_back(u(rng));
        p.push_back(u(rng));
        dr.push_back(u(rng));
    }
    const auto rows = balance(cells, v, p, dr);
    REQUIRE(rows.size() == 20);
    for (int i = 0; i < 20; ++i) CHECK(rows[i].balance == doctest::Approx(v[i] + dr[i] - p[i]));
    CHECK_THROWS_AS(balance(cells, std::vector<double>(3, 0.0), p, dr), InvalidArgument);
}

}  // TEST_SUITE

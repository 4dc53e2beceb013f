#include <carshare/clustering.hpp>

#include <carshare/csv.hpp>
#include <carshare/parallel.hpp>
#include <carshare/stats.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace carshare {

std::vector<double> normalise_profile(std::span<const double> raw) {
    const double m = stats::mean(raw);
    if (!(m > 0.0)) return {};
    std::vector<double> out(raw.begin(), raw.end());
    for (double& v : out) v /= m;
    return out;
}

std::vector<AvailabilityProfile> availability_profiles(const SnapshotSet& snapshots, const Grid& grid,
                                                       int bin_minutes, const TimeZone& tz) {
    if (bin_minutes <= 0 || 1440 % bin_minutes != 0) {
        throw InvalidArgument("bin length must divide 1440 minutes");
    }
    const auto bins = static_cast<std::size_t>(1440 / bin_minutes);
    const auto polls = snapshots.poll_instants();
    if (polls.empty()) return {};

    auto slot_of = [&](Timestamp t, std::chrono::sys_days first) {
        const auto local = tz.to_local(t);
        const auto midnight = std::chrono::floor<std::chrono::days>(local);
        const auto day = static_cast<std::size_t>(
            (std::chrono::sys_days(midnight.time_since_epoch()) - first).count());
        const auto minute = std::chrono::duration_cast<std::chrono::minutes>(local - midnight).count();
        return day * bins + static_cast<std::size_t>(minute / bin_minutes);
    };
    const auto first = std::chrono::sys_days(
        std::chrono::floor<std::chrono::days>(tz.to_local(polls.front())).time_since_epoch());
    const auto last = std::chrono::sys_days(
        std::chrono::floor<std::chrono::days>(tz.to_local(polls.back())).time_since_epoch());
    const auto n_days = static_cast<std::size_t>((last - first).count()) + 1;

    std::vector<double> polls_in_slot(n_days * bins, 0.0);
    for (auto t : polls) polls_in_slot[slot_of(t, first)] += 1.0;

    const auto& cells = grid.active_cells();
    std::vector<std::vector<double>> sums(cells.size());
    for (const auto& r : snapshots.records()) {
        const auto cell = grid.locate_active(r.position);
        if (!cell) continue;
        auto& s = sums[*grid.active_index(*cell)];
        if (s.empty()) s.assign(n_days * bins, 0.0);
        s[slot_of(r.time, first)] += 1.0;
    }

    std::vector<AvailabilityProfile> out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (sums[c].empty()) continue;
        std::vector<double> raw(bins, 0.0);
        for (std::size_t b = 0; b < bins; ++b) {
            double acc = 0.0;
            double days = 0.0;
            for (std::size_t d = 0; d < n_days; ++d) {
                const double n = polls_in_slot[d * bins + b];
                if (n <= 0.0) continue;
                acc += sums[c][d * bins + b] / n;
                days += 1.0;
            }
            raw[b] = days > 0.0 ? acc / days : 0.0;
        }
        auto values = normalise_profile(raw);
        if (values.empty()) continue;
        out.push_back({cells[c], std::move(values), stats::mean(raw)});
    }
    return out;
}

double dtw_distance(std::span<const double> a, std::span<const double> b, int band) {
    if (band < 0) {
        throw InvalidArgument("Sakoe-Chiba band must be non-negative");
    }
    if (a.size() != b.size()) {
        throw InvalidArgument("DTW profiles must have equal length");
    }
    const std::size_t n = a.size();
    if (n == 0) return 0.0;
    constexpr double inf = std::numeric_limits<double>::infinity();
    const auto w = static_cast<std::size_t>(band);
    std::vector<double> prev(n, inf), cur(n, inf);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(cur.begin(), cur.end(), inf);
        const std::size_t lo = i > w ? i - w : 0;
        const std::size_t hi = std::min(n - 1, i + w);
        for (std::size_t j = lo; j <= hi; ++j) {
            const double d = a[i] - b[j];
            const double cost = d * d;
            if (i == 0 && j == 0) {
                cur[j] = cost;
                continue;
            }
            double best = inf;
            if (i > 0) best = std::min(best, prev[j]);
            if (j > 0) best = std::min(best, cur[j - 1]);
            if (i > 0 && j > 0) best = std::min(best, prev[j - 1]);
            cur[j] = cost + best;
        }
        std::swap(prev, cur);
    }
    return prev[n - 1];
}

Eigen::MatrixXd dtw_matrix(const std::vector<std::vector<double>>& series, int band) {
    const std::size_t n = series.size();
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    parallel_for(n, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = dtw_distance(series[i], series[j], band);
        }
    });
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j) d(i, j) = d(j, i);
    return d;
}

namespace {

double assign(const Eigen::MatrixXd& d, const std::vector<std::size_t>& medoids, std::vector<int>& assignment) {
    const auto n = static_cast<std::size_t>(d.rows());
    assignment.assign(n, 0);
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m = 0; m < medoids.size(); ++m) {
            const double v = d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(medoids[m]));
            if (v < best) {
                best = v;
                assignment[i] = static_cast<int>(m);
            }
        }
        cost += best;
    }
    return cost;
}

}  // namespace

PamResult pam(const Eigen::MatrixXd& d, int k) {
    const auto n = static_cast<std::size_t>(d.rows());
    if (d.rows() != d.cols()) {
        throw InvalidArgument("distance matrix must be square");
    }
    if (k < 1 || static_cast<std::size_t>(k) > n) {
        throw InvalidArgument("PAM needs 1 <= k <= number of points");
    }
    PamResult r;
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    std::vector<bool> is_medoid(n, false);
    // BUILD: repeatedly add the point that lowers the total cost the most.
    for (int step = 0; step < k; ++step) {
        double best_cost = std::numeric_limits<double>::infinity();
        std::size_t best = 0;
        for (std::size_t c = 0; c < n; ++c) {
            if (is_medoid[c]) continue;
            double cost = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                cost += std::min(nearest[i], d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
            }
            if (cost < best_cost) {
                best_cost = cost;
                best = c;
            }
        }
        is_medoid[best] = true;
        r.medoids.push_back(best);
        for (std::size_t i = 0; i < n; ++i) {
            nearest[i] = std::min(nearest[i], d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best)));
        }
    }
    r.cost = assign(d, r.medoids, r.assignment);
    r.cost_trace.push_back(r.cost);

    // SWAP: apply the best improving (medoid, non-medoid) exchange until none is left.
    for (;;) {
        double best_cost = r.cost;
        std::size_t best_m = 0, best_h = 0;
        bool found = false;
        std::vector<int> scratch;
        for (std::size_t m = 0; m < r.medoids.size(); ++m) {
            for (std::size_t h = 0; h < n; ++h) {
                if (is_medoid[h]) continue;
                std::vector<std::size_t> trial = r.medoids;
                trial[m] = h;
                const double cost = assign(d, trial, scratch);
                if (cost < best_cost - 1e-12 * std::max(1.0, std::abs(best_cost))) {
                    best_cost = cost;
                    best_m = m;
                    best_h = h;
                    found = true;
                }
            }
        }
        if (!found) break;
        is_medoid[r.medoids[best_m]] = false;
        is_medoid[best_h] = true;
        r.medoids[best_m] = best_h;
        r.cost = assign(d, r.medoids, r.assignment);
        r.cost_trace.push_back(r.cost);
    }
    return r;
}

double mean_silhouette(const Eigen::MatrixXd& d, const std::vector<int>& assignment) {
    const std::size_t n = assignment.size();
    if (n == 0) return 0.0;
    const int k = *std::max_element(assignment.begin(), assignment.end()) + 1;
    std::vector<double> size(static_cast<std::size_t>(k), 0.0);
    for (int a : assignment) size[static_cast<std::size_t>(a)] += 1.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto own = static_cast<std::size_t>(assignment[i]);
        if (size[own] <= 1.0) continue;
        std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) sum[static_cast<std::size_t>(assignment[j])] += d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
        const double a = sum[own] / (size[own] - 1.0);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < sum.size(); ++c) {
            if (c != own && size[c] > 0.0) b = std::min(b, sum[c] / size[c]);
        }
        if (!std::isfinite(b)) continue;
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

ClusterSelection select_k(const Eigen::MatrixXd& d, int k_min, int k_max) {
    const auto n = static_cast<int>(d.rows());
    if (n < 3) {
        throw InvalidArgument("cluster selection needs at least three points");
    }
    ClusterSelection sel;
    if (!(d.maxCoeff() > 0.0)) {
        sel.k = 1;
        sel.clustering = pam(d, 1);
        sel.warnings.push_back("all profiles are identical; reporting a single cluster");
        return sel;
    }
    double best = -std::numeric_limits<double>::infinity();
    for (int k = std::max(2, k_min); k <= std::min(k_max, n - 1); ++k) {
        PamResult r = pam(d, k);
        const double s = mean_silhouette(d, r.assignment);
        sel.silhouettes.emplace_back(k, s);
        if (s > best + 1e-12) {
            best = s;
            sel.k = k;
            sel.clustering = std::move(r);
        }
    }
    return sel;
}

std::vector<ClusterLabel> label_clusters(const std::vector<std::vector<double>>& profiles,
                                         const std::vector<int>& assignment, int k, const LabelRules& rules) {
    if (profiles.size() != assignment.size() || profiles.empty()) {
        throw InvalidArgument("profiles and assignment must be aligned and non-empty");
    }
    const std::size_t bins = profiles.front().size();
    std::vector<ClusterLabel> out(static_cast<std::size_t>(k));
    for (auto& c : out) c.mean_profile.assign(bins, 0.0);
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        auto& c = out.at(static_cast<std::size_t>(assignment[i]));
        for (std::size_t b = 0; b < bins; ++b) c.mean_profile[b] += profiles[i][b];
        ++c.size;
    }
    for (auto& c : out) {
        if (c.size == 0) continue;
        for (double& v : c.mean_profile) v /= static_cast<double>(c.size);
        const auto [lo, hi] = std::minmax_element(c.mean_profile.begin(), c.mean_profile.end());
        c.range = *hi - *lo;
        c.peak_bin = static_cast<int>(hi - c.mean_profile.begin());
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& c = out[i];
        std::vector<double> others;
        for (std::size_t j = 0; j < out.size(); ++j) {
            if (j != i && out[j].size > 0) others.push_back(out[j].range);
        }
        if (!others.empty() && c.size <= rules.high_intensity_max_cells &&
            c.range > rules.high_intensity_ratio * stats::median(others)) {
            c.label = kLabelHighIntensity;
            continue;
        }
        if (c.range < rules.neutral_range) {
            c.label = kLabelNeutral;
            continue;
        }
        const double hour = c.peak_bin * rules.bin_minutes / 60.0;
        if (hour >= rules.day_start_hour && hour < rules.day_end_hour) {
            c.label = kLabelDay;
        } else if (hour >= rules.night_start_hour || hour < rules.night_end_hour) {
            c.label = kLabelNight;
        } else {
            c.label = kLabelNeutral;
        }
    }
    for (std::string_view unique : {kLabelDay, kLabelNight}) {
        std::size_t keeper = out.size();
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out[i].label == unique && (keeper == out.size() || out[i].range > out[keeper].range)) keeper = i;
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (out[i].label == unique && i != keeper) out[i].label = kLabelNeutral;
        }
    }
    return out;
}

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
    if (a.size() != b.size()) {
        throw InvalidArgument("partitions must cover the same items");
    }
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> ra, rb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        ra[a[i]] += 1.0;
        rb[b[i]] += 1.0;
    }
    auto c2 = [](double x) { return x * (x - 1.0) / 2.0; };
    double index = 0.0, sa = 0.0, sb = 0.0;
    for (const auto& [key, v] : joint) index += c2(v);
    for (const auto& [key, v] : ra) sa += c2(v);
    for (const auto& [key, v] : rb) sb += c2(v);
    const double total = c2(static_cast<double>(a.size()));
    if (total <= 0.0) return 1.0;
    const double expected = sa * sb / total;
    const double max_index = 0.5 * (sa + sb);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

void write_assignment_csv(std::ostream& out, const std::vector<AvailabilityProfile>& profiles,
                          const std::vector<int>& assignment, const std::vector<ClusterLabel>& labels) {
    csv::Writer w(out);
    w.row({"row", "col", "cluster", "label"});
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        w.row({std::to_string(profiles[i].cell.row), std::to_string(profiles[i].cell.col),
               std::to_string(assignment[i]), labels.at(static_cast<std::size_t>(assignment[i])).label});
    }
}

void write_cluster_profiles_csv(std::ostream& out, const std::vector<ClusterLabel>& labels, int bin_minutes) {
    csv::Writer w(out);
    w.row({"cluster", "label", "bin", "minute_of_day", "value"});
    for (std::size_t c = 0; c < labels.size(); ++c) {
        for (std::size_t b = 0; b < labels[c].mean_profile.size(); ++b) {
            w.row({std::to_string(c), labels[c].label, std::to_string(b),
                   std::to_string(static_cast<int>(b) * bin_minutes), csv::num(labels[c].mean_profile[b])});
        }
    }
}

nlohmann::json labelled_cells_geojson(const Grid& grid, const std::vector<AvailabilityProfile>& profiles,
                                      const std::vector<int>& assignment, const std::vector<ClusterLabel>& labels) {
    nlohmann::json features = nlohmann::json::array();
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        const auto& cell = profiles[i].cell;
        features.push_back(
            {{"type", "Feature"},
             {"properties",
              {{"row", cell.row},
               {"col", cell.col},
               {"cluster", assignment[i]},
               {"label", labels.at(static_cast<std::size_t>(assignment[i])).label}}},
             {"geometry", ring_to_geojson_geometry(grid.cell_ring(cell))}});
    }
    return {{"type", "FeatureCollection"}, {"features", features}};
}

}  // namespace carshare

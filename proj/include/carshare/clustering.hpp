#pragma once

#include <carshare/grid.hpp>
#include <carshare/ingest.hpp>
#include <carshare/time.hpp>

#include <Eigen/Dense>

#include <nlohmann/json.hpp>

#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace carshare {

/// Mean availability per time-of-day bin divided by the cell's overall mean.
struct AvailabilityProfile {
    CellId cell;
    std::vector<double> values;
    double mean_availability = 0.0;
};

/// Vehicle counts per poll are averaged within each bin of each local day, then
/// over the days that were polled in that bin. Cells never hosting a vehicle are
/// left out. Throws InvalidArgument when bin_minutes does not divide 1440.
std::vector<AvailabilityProfile> availability_profiles(const SnapshotSet& snapshots, const Grid& grid,
                                                       int bin_minutes = 10, const TimeZone& tz = TimeZone::utc());

/// Divides by the mean; returns an empty vector for a zero-mean series.
std::vector<double> normalise_profile(std::span<const double> raw);

/// Dynamic time warping with squared local cost, symmetric steps (diagonal,
/// horizontal, vertical, all with weight 1) and a Sakoe-Chiba band |i - j| <= band.
/// Returns the accumulated cost. Throws InvalidArgument for a negative band or
/// series of different lengths.
double dtw_distance(std::span<const double> a, std::span<const double> b, int band);

/// Symmetric matrix of pairwise DTW distances.
Eigen::MatrixXd dtw_matrix(const std::vector<std::vector<double>>& series, int band);

struct PamResult {
    std::vector<std::size_t> medoids;
    std::vector<int> assignment;  // index into medoids
    double cost = 0.0;
    std::vector<double> cost_trace;  // after BUILD, then after each swap
};

/// k-medoids by greedy BUILD followed by best-improvement SWAP. Deterministic;
/// ties go to the lowest index. Throws InvalidArgument when k is not in [1, n].
PamResult pam(const Eigen::MatrixXd& distances, int k);

/// Mean silhouette width; singletons contribute 0.
double mean_silhouette(const Eigen::MatrixXd& distances, const std::vector<int>& assignment);

struct ClusterSelection {
    int k = 1;
    PamResult clustering;
    std::vector<std::pair<int, double>> silhouettes;  // (k, mean width)
    std::vector<std::string> warnings;
};

/// Runs PAM for each k in [k_min, min(k_max, n - 1)] and keeps the largest mean
/// silhouette (smaller k on ties). Identical points give k = 1 with a warning.
ClusterSelection select_k(const Eigen::MatrixXd& distances, int k_min = 2, int k_max = 8);

struct LabelRules {
    int bin_minutes = 10;
    double high_intensity_ratio = 3.0;
    std::size_t high_intensity_max_cells = 3;
    double neutral_range = 0.2;
    int day_start_hour = 9;
    int day_end_hour = 17;
    int night_start_hour = 21;
    int night_end_hour = 6;
};

inline constexpr std::string_view kLabelDay = "day";
inline constexpr std::string_view kLabelNight = "night";
inline constexpr std::string_view kLabelNeutral = "neutral";
inline constexpr std::string_view kLabelHighIntensity = "high-intensity";

struct ClusterLabel {
    std::string label;
    std::vector<double> mean_profile;
    double range = 0.0;
    int peak_bin = 0;
    std::size_t size = 0;
};

/// Labels each cluster from its mean profile. A cluster is high-intensity when it
/// has at most high_intensity_max_cells members and its range exceeds the ratio
/// times the median range of the other clusters; otherwise neutral when the range
/// is below neutral_range, day or night by the peak time, and neutral otherwise.
/// When several clusters get day (or night), the one with the largest range keeps
/// it and the rest become neutral.
std::vector<ClusterLabel> label_clusters(const std::vector<std::vector<double>>& profiles,
                                         const std::vector<int>& assignment, int k, const LabelRules& rules = {});

/// Adjusted Rand index of two partitions of the same items.
double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);

void write_assignment_csv(std::ostream& out, const std::vector<AvailabilityProfile>& profiles,
                          const std::vector<int>& assignment, const std::vector<ClusterLabel>& labels);
void write_cluster_profiles_csv(std::ostream& out, const std::vector<ClusterLabel>& labels, int bin_minutes);
nlohmann::json labelled_cells_geojson(const Grid& grid, const std::vector<AvailabilityProfile>& profiles,
                                      const std::vector<int>& assignment, const std::vector<ClusterLabel>& labels);

}  // namespace carshare

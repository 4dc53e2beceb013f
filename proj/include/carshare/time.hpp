#pragma once

#include <carshare/types.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace carshare {

/// Maps UTC instants to a city's wall-clock time.
///
/// Accepts "UTC", fixed offsets ("+02:00", "UTC-05:30") and IANA names, which are
/// read from the system zoneinfo database. Instants after the last recorded
/// transition keep the last offset.
class TimeZone {
public:
    static TimeZone utc();
    static TimeZone fixed(std::chrono::minutes offset);
    static TimeZone from_spec(const std::string& spec,
                              const std::filesystem::path& zoneinfo_dir = "/usr/share/zoneinfo");

    std::chrono::seconds offset_at(Timestamp t) const;
    std::chrono::local_seconds to_local(Timestamp t) const;
    /// Inverse of to_local; ambiguous wall times resolve to the earlier instant.
    Timestamp to_utc(std::chrono::local_seconds local) const;

    const std::string& name() const { return name_; }

private:
    struct Transition {
        std::int64_t at = 0;
        std::int32_t offset = 0;
    };

    std::string name_ = "UTC";
    std::int32_t initial_offset_ = 0;
    std::vector<Transition> transitions_;
};

/// Parses "YYYY-MM-DD[T ]HH:MM[:SS][Z|+HH:MM|-HH:MM]" or integer epoch seconds.
/// A missing zone designator means UTC.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// ISO-8601 with a trailing Z, second resolution.
std::string format_timestamp(Timestamp t);

std::optional<std::chrono::year_month_day> parse_date(std::string_view text);
std::string format_date(std::chrono::year_month_day d);

/// Day of week with Sunday = 0 ... Saturday = 6.
int day_of_week(std::chrono::sys_days d);
inline bool is_weekday(std::chrono::sys_days d) {
    const int w = day_of_week(d);
    return w != 0 && w != 6;
}

}  // namespace carshare

#include <carshare/time.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <iterator>

namespace carshare {

namespace {

using namespace std::chrono;

std::int64_t read_be(const std::vector<unsigned char>& buf, std::size_t pos, int bytes) {
    if (pos + static_cast<std::size_t>(bytes) > buf.size()) {
        throw InputError("truncated zoneinfo file");
    }
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) {
        v = (v << 8) | buf[pos + static_cast<std::size_t>(i)];
    }
    if (bytes == 4) {
        return static_cast<std::int32_t>(static_cast<std::uint32_t>(v));
    }
    return static_cast<std::int64_t>(v);
}

struct TzifCounts {
    std::int64_t isut, isstd, leap, time, type, chars;
};

TzifCounts read_counts(const std::vector<unsigned char>& buf, std::size_t header) {
    return {read_be(buf, header + 20, 4), read_be(buf, header + 24, 4), read_be(buf, header + 28, 4),
            read_be(buf, header + 32, 4), read_be(buf, header + 36, 4), read_be(buf, header + 40, 4)};
}

std::size_t block_size(const TzifCounts& c, int time_bytes) {
    return static_cast<std::size_t>(c.time * time_bytes + c.time + c.type * 6 + c.chars +
                                    c.leap * (time_bytes + 4) + c.isstd + c.isut);
}

std::optional<int> parse_int(std::string_view s) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

// "+HH:MM", "-HH", "+HHMM"
std::optional<minutes> parse_offset(std::string_view s) {
    if (s.empty() || (s[0] != '+' && s[0] != '-')) {
        return std::nullopt;
    }
    const int sign = s[0] == '-' ? -1 : 1;
    s.remove_prefix(1);
    std::string digits;
    for (char c : s) {
        if (c != ':') {
            digits.push_back(c);
        }
    }
    if (digits.empty() || digits.size() > 4) {
        return std::nullopt;
    }
    int hh = 0;
    int mm = 0;
    if (digits.size() <= 2) {
        auto h = parse_int(digits);
        if (!h) return std::nullopt;
        hh = *h;
    } else {
        auto h = parse_int(std::string_view(digits).substr(0, digits.size() - 2));
        auto m = parse_int(std::string_view(digits).substr(digits.size() - 2));
        if (!h || !m) return std::nullopt;
        hh = *h;
        mm = *m;
    }
    if (hh > 14 || mm > 59) {
        return std::nullopt;
    }
    return minutes{sign * (hh * 60 + mm)};
}

}  // namespace

TimeZone TimeZone::utc() { return TimeZone{}; }

TimeZone TimeZone::fixed(std::chrono::minutes offset) {
    TimeZone tz;
    tz.initial_offset_ = static_cast<std::int32_t>(duration_cast<seconds>(offset).count());
    const int total = static_cast<int>(offset.count());
    tz.name_ = total == 0 ? "UTC"
                          : fmt::format("{}{:02d}:{:02d}", total < 0 ? '-' : '+', std::abs(total) / 60,
                                        std::abs(total) % 60);
    return tz;
}

TimeZone TimeZone::from_spec(const std::string& spec, const std::filesystem::path& zoneinfo_dir) {
    if (spec.empty() || spec == "UTC" || spec == "Z" || spec == "GMT") {
        return utc();
    }
    std::string_view sv = spec;
    if (sv.starts_with("UTC") || sv.starts_with("GMT")) {
        sv.remove_prefix(3);
    }
    if (auto off = parse_offset(sv)) {
        return fixed(*off);
    }

    const auto path = zoneinfo_dir / spec;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("unknown time zone '" + spec + "'");
    }
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 44 || buf[0] != 'T' || buf[1] != 'Z' || buf[2] != 'i' || buf[3] != 'f') {
        throw InputError("not a TZif file: " + path.string());
    }
    const char version = static_cast<char>(buf[4]);
    TzifCounts counts = read_counts(buf, 0);
    std::size_t data = 44;
    int time_bytes = 4;
    if (version >= '2') {
        const std::size_t second_header = 44 + block_size(counts, 4);
        counts = read_counts(buf, second_header);
        data = second_header + 44;
        time_bytes = 8;
    }

    std::vector<std::int64_t> times(static_cast<std::size_t>(counts.time));
    for (std::size_t i = 0; i < times.size(); ++i) {
        times[i] = read_be(buf, data + i * static_cast<std::size_t>(time_bytes), time_bytes);
    }
    const std::size_t idx_pos = data + times.size() * static_cast<std::size_t>(time_bytes);
    const std::size_t type_pos = idx_pos + times.size();
    std::vector<std::int32_t> type_offsets(static_cast<std::size_t>(counts.type));
    for (std::size_t i = 0; i < type_offsets.size(); ++i) {
        type_offsets[i] = static_cast<std::int32_t>(read_be(buf, type_pos + i * 6, 4));
    }
    if (type_offsets.empty()) {
        throw InputError("zoneinfo file without local time types: " + path.string());
    }

    TimeZone tz;
    tz.name_ = spec;
    tz.initial_offset_ = type_offsets.front();
    for (std::size_t i = 0; i < times.size(); ++i) {
        const std::size_t type = buf.at(idx_pos + i);
        tz.transitions_.push_back({times[i], type_offsets.at(type)});
    }
    return tz;
}

std::chrono::seconds TimeZone::offset_at(Timestamp t) const {
    const std::int64_t s = t.time_since_epoch().count();
    auto it = std::upper_bound(transitions_.begin(), transitions_.end(), s,
                               [](std::int64_t v, const Transition& tr) { return v < tr.at; });
    if (it == transitions_.begin()) {
        return seconds{initial_offset_};
    }
    return seconds{std::prev(it)->offset};
}

std::chrono::local_seconds TimeZone::to_local(Timestamp t) const {
    return local_seconds{t.time_since_epoch() + offset_at(t)};
}

Timestamp TimeZone::to_utc(std::chrono::local_seconds local) const {
    // Offsets in force half a day either side bracket any single transition.
    const Timestamp near{local.time_since_epoch()};
    const seconds before = offset_at(near - hours{14});
    const seconds after = offset_at(near + hours{14});
    const Timestamp early{local.time_since_epoch() - before};
    const Timestamp late{local.time_since_epoch() - after};
    const bool early_ok = to_local(early) == local;
    const bool late_ok = to_local(late) == local;
    if (early_ok && late_ok) {
        return std::min(early, late);
    }
    if (late_ok) {
        return late;
    }
    // Either valid or inside a spring-forward gap, where the earlier offset applies.
    return early;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (text.empty()) {
        return std::nullopt;
    }
    if (std::all_of(text.begin(), text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
        long long epoch = 0;
        const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), epoch);
        if (ec != std::errc{}) {
            return std::nullopt;
        }
        return Timestamp{seconds{epoch}};
    }
    if (text.size() < 16 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != ' ') ||
        text[13] != ':') {
        return std::nullopt;
    }
    auto date = parse_date(text.substr(0, 10));
    auto hh = parse_int(text.substr(11, 2));
    auto mi = parse_int(text.substr(14, 2));
    if (!date || !hh || !mi || *hh > 23 || *mi > 59) {
        return std::nullopt;
    }
    std::size_t pos = 16;
    int ss = 0;
    if (pos < text.size() && text[pos] == ':') {
        auto s = parse_int(text.substr(pos + 1, 2));
        if (!s || *s > 60) {
            return std::nullopt;
        }
        ss = *s;
        pos += 3;
        if (pos < text.size() && text[pos] == '.') {
            ++pos;
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
        }
    }
    minutes offset{0};
    if (pos < text.size()) {
        const std::string_view zone = text.substr(pos);
        if (zone == "Z" || zone == "z") {
            offset = minutes{0};
        } else if (auto off = parse_offset(zone)) {
            offset = *off;
        } else {
            return std::nullopt;
        }
    }
    const sys_seconds local = sys_days{*date} + hours{*hh} + minutes{*mi} + seconds{ss};
    return Timestamp{local - offset};
}

std::string format_timestamp(Timestamp t) {
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss hms{t - day};
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hms.hours().count(),
                       hms.minutes().count(), hms.seconds().count());
}

std::optional<year_month_day> parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        return std::nullopt;
    }
    auto y = parse_int(text.substr(0, 4));
    auto m = parse_int(text.substr(5, 2));
    auto d = parse_int(text.substr(8, 2));
    if (!y || !m || !d) {
        return std::nullopt;
    }
    const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*m)}, day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return ymd;
}

std::string format_date(year_month_day d) {
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                       static_cast<unsigned>(d.day()));
}

int day_of_week(sys_days d) { return static_cast<int>(weekday{d}.c_encoding()); }

}  // namespace carshare

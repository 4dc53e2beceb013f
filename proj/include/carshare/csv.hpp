#pragma once

#include <carshare/types.hpp>

#include <fmt/format.h>

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace carshare::csv {

/// Splits one CSV line (RFC 4180 quoting, no embedded newlines).
std::vector<std::string> split_line(std::string_view line);

/// Quotes a field when it contains a separator, quote or newline.
std::string escape(std::string_view field);

/// Shortest round-trip representation; stable across runs.
inline std::string num(double v) { return fmt::format("{}", v); }

/// Streaming reader with a header row.
class Reader {
public:
    explicit Reader(std::istream& in);

    const std::vector<std::string>& header() const { return header_; }
    /// Index of a header column or nullopt.
    std::optional<std::size_t> column(std::string_view name) const;
    /// Same as column() but throws InputError when absent.
    std::size_t require(std::string_view name) const;

    /// Reads the next non-empty row; false at end of input.
    bool next(std::vector<std::string>& row);
    std::size_t line_number() const { return line_; }

private:
    std::istream& in_;
    std::vector<std::string> header_;
    std::size_t line_ = 0;
};

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

}  // namespace carshare::csv

#include <carshare/csv.hpp>

namespace carshare::csv {

std::vector<std::string> split_line(std::string_view line) {
    if (!line.empty() && line.back() == '\r') {
        line.remove_suffix(1);
    }
    std::vector<std::string> fields;
    std::string current;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    current.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                current.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(std::move(current));
    return fields;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

Reader::Reader(std::istream& in) : in_(in) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (!line.empty() && line != "\r") {
            header_ = split_line(line);
            if (!header_.empty() && header_[0].starts_with("\xEF\xBB\xBF")) {
                header_[0].erase(0, 3);
            }
            return;
        }
    }
}

std::optional<std::size_t> Reader::column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i) {
        if (header_[i] == name) {
            return i;
        }
    }
    return std::nullopt;
}

std::size_t Reader::require(std::string_view name) const {
    if (auto c = column(name)) {
        return *c;
    }
    throw InputError("CSV input lacks column '" + std::string(name) + "'");
}

bool Reader::next(std::vector<std::string>& row) {
    std::string line;
    while (std::getline(in_, line)) {
        ++line_;
        if (line.empty() || line == "\r") {
            continue;
        }
        row = split_line(line);
        return true;
    }
    return false;
}

void Writer::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            out_ << ',';
        }
        out_ << escape(fields[i]);
    }
    out_ << '\n';
}

}  // namespace carshare::csv

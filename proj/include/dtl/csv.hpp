#pragma once

// CSV primitives. Doubles are written in the shortest decimal form that
// parses back to the same value, so equal results give equal bytes.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace dtl {

inline std::string format_double(double x) {
    if (std::isnan(x))
        return "nan";
    if (std::isinf(x))
        return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc())
        return "nan";
    return std::string(buf, end);
}

/// Appends fields separated by commas; call end_row() to terminate a line.
class CsvRow {
  public:
    CsvRow& operator<<(std::string_view s) {
        sep();
        line_.append(s);
        return *this;
    }
    CsvRow& operator<<(const std::string& s) { return *this << std::string_view(s); }
    CsvRow& operator<<(const char* s) { return *this << std::string_view(s); }
    CsvRow& operator<<(double x) { return *this << format_double(x); }
    CsvRow& operator<<(std::int64_t x) { return *this << std::to_string(x); }
    CsvRow& operator<<(std::uint64_t x) { return *this << std::to_string(x); }
    CsvRow& operator<<(int x) { return *this << std::to_string(x); }
    CsvRow& operator<<(bool b) { return *this << (b ? "1" : "0"); }

    std::string str() const { return line_ + "\n"; }

  private:
    void sep() {
        if (!first_)
            line_.push_back(',');
        first_ = false;
    }
    std::string line_;
    bool first_ = true;
};

/// Splits one CSV line on commas (no quoting; the harness never emits quotes).
inline std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        out.emplace_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        if (comma == std::string_view::npos)
            break;
        start = comma + 1;
    }
    return out;
}

} // namespace dtl

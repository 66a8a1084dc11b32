#pragma once

#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>

namespace customs {

// Calendar date stored as days since 1970-01-01 (proleptic Gregorian).
// Conversions use the classic days-from-civil algorithm.
class Date {
public:
    Date() = default;
    explicit Date(int days_since_epoch) : days_(days_since_epoch) {}

    static Date from_ymd(int y, unsigned m, unsigned d) {
        y -= m <= 2;
        const int era = (y >= 0 ? y : y - 399) / 400;
        const unsigned yoe = static_cast<unsigned>(y - era * 400);
        const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
        const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        return Date(era * 146097 + static_cast<int>(doe) - 719468);
    }

    struct Ymd {
        int year;
        unsigned month;
        unsigned day;
    };

    Ymd ymd() const {
        int z = days_ + 719468;
        const int era = (z >= 0 ? z : z - 146096) / 146097;
        const unsigned doe = static_cast<unsigned>(z - era * 146097);
        const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
        const int y = static_cast<int>(yoe) + era * 400;
        const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        const unsigned mp = (5 * doy + 2) / 153;
        const unsigned d = doy - (153 * mp + 2) / 5 + 1;
        const unsigned m = mp + (mp < 10 ? 3 : -9);
        return {y + (m <= 2), m, d};
    }

    int days() const { return days_; }

    // "YYYY-MM-DD"
    std::string to_string() const {
        const Ymd v = ymd();
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", v.year, v.month, v.day);
        return buf;
    }

    // Accepts "YYYY-MM-DD"; rejects malformed or out-of-range components.
    static std::optional<Date> parse(const std::string& s) {
        if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
        int y;
        unsigned m, d;
        if (std::sscanf(s.c_str(), "%4d-%2u-%2u", &y, &m, &d) != 3) return std::nullopt;
        if (!valid_ymd(y, m, d)) return std::nullopt;
        return from_ymd(y, m, d);
    }

    // Accepts "YYYYMMDD" (the CLI date format).
    static std::optional<Date> parse_compact(const std::string& s) {
        if (s.size() != 8) return std::nullopt;
        for (char c : s)
            if (c < '0' || c > '9') return std::nullopt;
        const int y = std::stoi(s.substr(0, 4));
        const unsigned m = static_cast<unsigned>(std::stoi(s.substr(4, 2)));
        const unsigned d = static_cast<unsigned>(std::stoi(s.substr(6, 2)));
        if (!valid_ymd(y, m, d)) return std::nullopt;
        return from_ymd(y, m, d);
    }

    friend Date operator+(Date a, int days) { return Date(a.days_ + days); }
    friend Date operator-(Date a, int days) { return Date(a.days_ - days); }
    friend int operator-(Date a, Date b) { return a.days_ - b.days_; }
    friend bool operator==(Date a, Date b) { return a.days_ == b.days_; }
    friend bool operator!=(Date a, Date b) { return a.days_ != b.days_; }
    friend bool operator<(Date a, Date b) { return a.days_ < b.days_; }
    friend bool operator<=(Date a, Date b) { return a.days_ <= b.days_; }
    friend bool operator>(Date a, Date b) { return a.days_ > b.days_; }
    friend bool operator>=(Date a, Date b) { return a.days_ >= b.days_; }

private:
    static bool valid_ymd(int y, unsigned m, unsigned d) {
        if (m < 1 || m > 12 || d < 1) return false;
        static const unsigned mdays[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
        unsigned dim = mdays[m - 1];
        const bool leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
        if (m == 2 && leap) dim = 29;
        return d <= dim;
    }

    int days_ = 0;
};

}  // namespace customs

#include "text_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace insertrank::detail {

std::optional<double> parse_double(std::string_view s) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double value{};
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return value;
}

std::string unescape_tsv(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            switch (s[i + 1]) {
                case 'n': out.push_back('\n'); ++i; continue;
                case 't': out.push_back('\t'); ++i; continue;
                case 'r': out.push_back('\r'); ++i; continue;
                case '\\': out.push_back('\\'); ++i; continue;
                default: break;
            }
        }
        out.push_back(s[i]);
    }
    return out;
}

std::string escape_tsv(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            case '\\': out += "\\\\"; break;
            default: out.push_back(c);
        }
    }
    return out;
}

std::string format_fixed(double value, int decimals) {
    // -0.0 would print as "-0.000"
    if (value == 0.0) value = 0.0;
    char buf[64];
    int n = std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    if (n < 0 || n >= static_cast<int>(sizeof buf)) {
        std::string big(static_cast<std::size_t>(std::max(n, 0)) + 1, '\0');
        std::snprintf(big.data(), big.size(), "%.*f", decimals, value);
        big.resize(static_cast<std::size_t>(std::max(n, 0)));
        return big;
    }
    return std::string(buf, static_cast<std::size_t>(n));
}

}  // namespace insertrank::detail

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>

namespace longbasis {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Closed integer interval [first, last] of ages or calendar years.
struct IntRange {
    int first = 0;
    int last = -1;

    int size() const { return last >= first ? last - first + 1 : 0; }
    bool empty() const { return last < first; }
    bool contains(int v) const { return v >= first && v <= last; }
    int index(int v) const { return v - first; }
    int value(int i) const { return first + i; }
    bool contains(const IntRange& other) const {
        return other.empty() || (other.first >= first && other.last <= last);
    }

    friend bool operator==(const IntRange&, const IntRange&) = default;
};

inline IntRange intersect(const IntRange& a, const IntRange& b) {
    return {std::max(a.first, b.first), std::min(a.last, b.last)};
}

inline std::string to_string(const IntRange& r) {
    return std::to_string(r.first) + "-" + std::to_string(r.last);
}

} // namespace longbasis

#pragma once

#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "glwb/common.hpp"

namespace glwb {

// Dense 7x7 row-major matrix, sized for the health chain.
struct Matrix7 {
    std::array<double, 49> a{};

    double& operator()(int r, int c) { return a[r * 7 + c]; }
    double operator()(int r, int c) const { return a[r * 7 + c]; }

    static Matrix7 identity() {
        Matrix7 m;
        for (int i = 0; i < 7; ++i) m(i, i) = 1.0;
        return m;
    }

    Matrix7 operator*(const Matrix7& o) const {
        Matrix7 r;
        for (int i = 0; i < 7; ++i)
            for (int k = 0; k < 7; ++k) {
                const double v = (*this)(i, k);
                if (v == 0.0) continue;
                for (int j = 0; j < 7; ++j) r(i, j) += v * o(k, j);
            }
        return r;
    }

    double max_abs_row_sum() const {
        double m = 0.0;
        for (int i = 0; i < 7; ++i) {
            double s = 0.0;
            for (int j = 0; j < 7; ++j) s += std::abs((*this)(i, j));
            m = std::max(m, s);
        }
        return m;
    }
};

using StateVector = std::array<double, 7>;

inline StateVector propagate(const StateVector& v, const Matrix7& m) {
    StateVector r{};
    for (int i = 0; i < 7; ++i) {
        if (v[i] == 0.0) continue;
        for (int j = 0; j < 7; ++j) r[j] += v[i] * m(i, j);
    }
    return r;
}

// Transition-intensity coefficients for one ordered state pair.  Exactly one
// functional form is active: age-exponential A + B*exp(C*(age-68.5)) or
// age-linear A + D*age, floored at zero.
struct IntensityCell {
    enum class Form { Exponential, Linear };
    Form form = Form::Linear;
    double A = 0.0, B = 0.0, C = 0.0, D = 0.0;

    double rate(double age) const {
        const double v = form == Form::Exponential ? A + B * std::exp(C * (age - 68.5))
                                                   : A + D * age;
        return std::max(0.0, v);
    }
};

// The full coefficient table.  Shipped as a delimited text file so alternative
// calibrations can be swapped in; rows are `from,to,form,A,B,C,D` with empty
// fields for the coefficients the chosen form does not use.
class IntensityTable {
public:
    const IntensityCell& cell(int from, int to) const {
        check_pair(from, to);
        const auto& c = cells_[index(from, to)];
        if (!c)
            throw ConfigError("intensity table has no coefficients for transition (" +
                              std::to_string(from) + ", " + std::to_string(to) + ")");
        return *c;
    }

    void set(int from, int to, IntensityCell c) {
        check_pair(from, to);
        cells_[index(from, to)] = c;
    }

    void clear(int from, int to) {
        check_pair(from, to);
        cells_[index(from, to)].reset();
    }

    bool complete() const {
        for (int f = 1; f <= 6; ++f)
            for (int t = 1; t <= 7; ++t)
                if (t != f && !cells_[index(f, t)]) return false;
        return true;
    }

    static IntensityTable load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open intensity table '" + path + "'");
        IntensityTable tab;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            if (lineno == 1 && line.rfind("from", 0) == 0) continue; // header
            std::array<std::string, 7> f{};
            std::stringstream ss(line);
            std::string tok;
            size_t n = 0;
            while (std::getline(ss, tok, ',') && n < 7) f[n++] = tok;
            if (n < 3)
                throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed row");
            const int from = std::atoi(f[0].c_str());
            const int to = std::atoi(f[1].c_str());
            IntensityCell cell;
            auto num = [&](const std::string& s, const char* what) {
                if (s.empty())
                    throw ConfigError(path + ":" + std::to_string(lineno) + ": missing " +
                                      what + " for (" + f[0] + ", " + f[1] + ")");
                return std::strtod(s.c_str(), nullptr);
            };
            if (f[2] == "exp") {
                cell.form = IntensityCell::Form::Exponential;
                cell.A = num(f[3], "A");
                cell.B = num(f[4], "B");
                cell.C = num(f[5], "C");
                if (!f[6].empty())
                    throw ConfigError(path + ":" + std::to_string(lineno) +
                                      ": D must be empty for the exponential form");
            } else if (f[2] == "linear") {
                cell.form = IntensityCell::Form::Linear;
                cell.A = num(f[3], "A");
                cell.D = num(f[6], "D");
                if (!f[4].empty() || !f[5].empty())
                    throw ConfigError(path + ":" + std::to_string(lineno) +
                                      ": B and C must be empty for the linear form");
            } else {
                throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown form '" +
                                  f[2] + "'");
            }
            tab.set(from, to, cell);
        }
        if (!tab.complete())
            throw ConfigError(path + ": intensity table is missing transitions");
        return tab;
    }

private:
    static void check_pair(int from, int to) {
        if (from < 1 || from > 6 || to < 1 || to > 7 || to == from)
            throw ConfigError("invalid transition pair (" + std::to_string(from) + ", " +
                              std::to_string(to) + ")");
    }
    static size_t index(int from, int to) { return (from - 1) * 7 + (to - 1); }
    std::array<std::optional<IntensityCell>, 42> cells_{};
};

// Transition intensity from -> to at the given attained age, per year.
// State 7 is absorbing: every intensity out of it is zero.
inline double intensity(const IntensityTable& table, int from, int to, double attained_age) {
    if (from == kDeadState) return 0.0;
    if (from == to) throw std::invalid_argument("intensity: from == to");
    return table.cell(from, to).rate(attained_age);
}

// Generator of the health chain for policy year n (attained age x0 + n,
// time-homogeneous within the year).  Rows sum to zero; row 7 is zero.
inline Matrix7 generator(const IntensityTable& table, int x0, int n) {
    if (n < 0) throw std::invalid_argument("generator: policy year must be nonnegative");
    if (x0 + n >= kMaxAge)
        throw std::domain_error("generator: attained age " + std::to_string(x0 + n) +
                                " is beyond the forced-absorption age");
    const double age = static_cast<double>(x0 + n);
    Matrix7 q;
    for (int i = 1; i <= 6; ++i) {
        double s = 0.0;
        for (int j = 1; j <= 7; ++j) {
            if (j == i) continue;
            const double v = intensity(table, i, j, age);
            q(i - 1, j - 1) = v;
            s += v;
        }
        q(i - 1, i - 1) = -s;
    }
    return q;
}

// exp(Q) by scaling-and-squaring with a fixed-order Taylor series.  The
// generators here have row sums zero and moderate norms, so after scaling to
// norm <= 1/2 an order-13 series reaches machine precision.
inline Matrix7 matrix_exponential(const Matrix7& q) {
    const double norm = q.max_abs_row_sum();
    int s = 0;
    double scale = 1.0;
    while (norm * scale > 0.5) {
        ++s;
        scale *= 0.5;
    }
    Matrix7 qs = q;
    for (auto& v : qs.a) v *= scale;

    Matrix7 result = Matrix7::identity();
    Matrix7 term = Matrix7::identity();
    for (int k = 1; k <= 13; ++k) {
        term = term * qs;
        for (auto& v : term.a) v /= k;
        for (int i = 0; i < 49; ++i) result.a[i] += term.a[i];
    }
    for (int i = 0; i < s; ++i) result = result * result;
    return result;
}

// Annual transition matrix for one policy year.
inline Matrix7 annual_transition(const Matrix7& q) { return matrix_exponential(q); }

// Annual transition matrices for every policy year of a contract entered at
// x0, indexed by n = 0 .. (122 - x0 - 1).  At attained age 121 the yearly
// matrix is replaced by certain absorption into state 7.
struct HealthSequence {
    int x0 = 60;
    std::vector<Matrix7> annual;

    int years() const { return static_cast<int>(annual.size()); }
    const Matrix7& year(int n) const { return annual.at(n); }
};

inline HealthSequence transition_sequence(const IntensityTable& table, int x0) {
    if (x0 < 60 || x0 >= kMaxAge)
        throw std::domain_error("transition_sequence: entry age must lie in [60, 121]");
    HealthSequence seq;
    seq.x0 = x0;
    const int T = kMaxAge - x0;
    seq.annual.reserve(T);
    for (int n = 0; n < T; ++n) {
        if (x0 + n == kMaxAge - 1) {
            Matrix7 forced;
            for (int i = 0; i < 7; ++i) forced(i, kDeadState - 1) = 1.0;
            seq.annual.push_back(forced);
        } else {
            seq.annual.push_back(annual_transition(generator(table, x0, n)));
        }
    }
    return seq;
}

// Distribution over health states after n policy years from a unit mass on
// `initial` (1-based state code).
inline StateVector state_distribution(const HealthSequence& seq, int n, int initial) {
    if (initial < 1 || initial > 7)
        throw std::invalid_argument("state_distribution: initial state must lie in 1..7");
    if (n < 0 || n > seq.years())
        throw std::invalid_argument("state_distribution: year out of range");
    StateVector v{};
    v[initial - 1] = 1.0;
    for (int m = 0; m < n; ++m) v = propagate(v, seq.annual[m]);
    return v;
}

} // namespace glwb

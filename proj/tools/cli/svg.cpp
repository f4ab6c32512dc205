#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mgsim/errors.hpp"

namespace mgsim::svg {

namespace {

constexpr double W = 820, H = 500, ML = 90, MR = 170, MT = 40, MB = 60;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else if (c == '&') out += "&amp;";
        else out += c;
    }
    return out;
}

struct Range {
    double lo = INFINITY, hi = -INFINITY;
    void add(double v) {
        if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
    }
    void pad() {
        if (!std::isfinite(lo)) lo = 0, hi = 1;
        if (hi - lo <= 1e-12 * std::max(std::abs(lo), std::abs(hi))) {
            const double d = std::max(std::abs(lo) * 1e-6, 1e-12);
            lo -= d, hi += d;
        }
    }
};

}  // namespace

void plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
          const std::string& y_label, const std::vector<Series>& series, Style style) {
    Range rx, ry;
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.x.size() && k < s.y.size(); ++k) rx.add(s.x[k]), ry.add(s.y[k]);
    rx.pad();
    ry.pad();
    const double pw = W - ML - MR, ph = H - MT - MB;
    auto X = [&](double v) { return ML + (v - rx.lo) / (rx.hi - rx.lo) * pw; };
    auto Y = [&](double v) { return MT + (ry.hi - v) / (ry.hi - ry.lo) * ph; };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
        << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(title) << "</text>\n";
    out << "<rect x=\"" << ML << "\" y=\"" << MT << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double vx = rx.lo + (rx.hi - rx.lo) * k / 4.0, vy = ry.lo + (ry.hi - ry.lo) * k / 4.0;
        out << "<line x1=\"" << X(vx) << "\" y1=\"" << MT + ph << "\" x2=\"" << X(vx) << "\" y2=\"" << MT + ph + 5
            << "\" stroke=\"black\"/><text x=\"" << X(vx) << "\" y=\"" << MT + ph + 18
            << "\" text-anchor=\"middle\">" << num(vx) << "</text>\n";
        out << "<line x1=\"" << ML - 5 << "\" y1=\"" << Y(vy) << "\" x2=\"" << ML << "\" y2=\"" << Y(vy)
            << "\" stroke=\"black\"/><text x=\"" << ML - 8 << "\" y=\"" << Y(vy) + 4 << "\" text-anchor=\"end\">"
            << num(vy) << "</text>\n";
    }
    out << "<text x=\"" << ML + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << esc(x_label)
        << "</text>\n";
    out << "<text transform=\"translate(18," << MT + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << esc(y_label) << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % (sizeof kPalette / sizeof *kPalette)];
        const auto& sr = series[s];
        const std::size_t n = std::min(sr.x.size(), sr.y.size());
        if (style == Style::lines) {
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
            for (std::size_t k = 0; k < n; ++k)
                if (std::isfinite(sr.x[k]) && std::isfinite(sr.y[k])) out << num(X(sr.x[k])) << ',' << num(Y(sr.y[k])) << ' ';
            out << "\"/>\n";
        } else {
            for (std::size_t k = 0; k < n; ++k)
                if (std::isfinite(sr.x[k]) && std::isfinite(sr.y[k]))
                    out << "<circle cx=\"" << num(X(sr.x[k])) << "\" cy=\"" << num(Y(sr.y[k])) << "\" r=\"2.5\" fill=\""
                        << color << "\"/>\n";
        }
        const double ly = MT + 12 + 16 * static_cast<double>(s);
        out << "<rect x=\"" << W - MR + 12 << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"8\" fill=\"" << color
            << "\"/><text x=\"" << W - MR + 30 << "\" y=\"" << ly << "\">" << esc(sr.name) << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace mgsim::svg

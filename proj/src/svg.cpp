#include "idem/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace idem {

namespace {

constexpr double kWidth = 800, kHeight = 480;
constexpr double kLeft = 70, kRight = 30, kTop = 30, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b"};

std::string num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

} // namespace

void emit_loss_chart(const std::vector<LossSeries>& series, const std::string& path) {
    std::size_t total = 0;
    int max_len = 0;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const LossSeries& s : series) {
        total += s.values.size();
        max_len = std::max(max_len, static_cast<int>(s.values.size()));
        for (double v : s.values) {
            if (!std::isfinite(v))
                throw std::invalid_argument("loss series contains a non-finite value");
            lo = first ? v : std::min(lo, v);
            hi = first ? v : std::max(hi, v);
            first = false;
        }
    }
    if (total < 2)
        throw std::invalid_argument("loss chart needs at least two records");
    if (hi == lo)
        hi = lo + 1.0; // flat series still gets a visible axis span
    double x_max = std::max(1, max_len - 1);

    auto px = [x_max](double episode) {
        return kLeft + (kWidth - kLeft - kRight) * episode / x_max;
    };
    auto py = [lo, hi](double v) {
        return kHeight - kBottom - (kHeight - kTop - kBottom) * (v - lo) / (hi - lo);
    };

    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot write " + path);

    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
       << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
       << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight
       << "\" fill=\"white\"/>\n";

    // axes
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
       << kWidth - kRight << "\" y2=\"" << kHeight - kBottom
       << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
       << kHeight - kBottom << "\" stroke=\"black\" stroke-width=\"1\"/>\n";

    const int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        double fx = x_max * i / ticks;
        double x = px(fx);
        os << "<line x1=\"" << num(x) << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << num(x)
           << "\" y2=\"" << kHeight - kBottom + 5 << "\" stroke=\"black\"/>\n"
           << "<text x=\"" << num(x) << "\" y=\"" << kHeight - kBottom + 20
           << "\" font-size=\"11\" text-anchor=\"middle\">" << num(fx) << "</text>\n";
        double fy = lo + (hi - lo) * i / ticks;
        double y = py(fy);
        os << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(y) << "\" x2=\"" << kLeft
           << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>\n"
           << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(y + 4)
           << "\" font-size=\"11\" text-anchor=\"end\">" << num(fy) << "</text>\n";
    }
    os << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 10
       << "\" font-size=\"13\" text-anchor=\"middle\">episode</text>\n";
    os << "<text x=\"16\" y=\"" << (kTop + kHeight - kBottom) / 2
       << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << (kTop + kHeight - kBottom) / 2 << ")\">mean loss</text>\n";

    // one polyline per series, plus a small legend
    for (std::size_t k = 0; k < series.size(); ++k) {
        const LossSeries& s = series[k];
        const char* color = kColors[k % (sizeof kColors / sizeof kColors[0])];
        if (!s.values.empty()) {
            os << "<polyline fill=\"none\" stroke=\"" << color
               << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.values.size(); ++i) {
                if (i)
                    os << ' ';
                os << num(px(static_cast<double>(i))) << ',' << num(py(s.values[i]));
            }
            os << "\"/>\n";
        }
        double ly = kTop + 16 * static_cast<double>(k);
        os << "<rect x=\"" << kWidth - kRight - 150 << "\" y=\"" << num(ly - 9)
           << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n"
           << "<text x=\"" << kWidth - kRight - 134 << "\" y=\"" << num(ly + 2)
           << "\" font-size=\"12\">" << xml_escape(s.label) << "</text>\n";
    }
    os << "</svg>\n";
}

} // namespace idem

#pragma once

#include <string>
#include <vector>

namespace idem {

struct LossSeries {
    std::string label;
    std::vector<double> values; // index = episode
};

// Static SVG line chart of mean loss per episode, one polyline per series.
// Needs at least two data points in total.
void emit_loss_chart(const std::vector<LossSeries>& series, const std::string& path);

} // namespace idem

#pragma once

#include <string>
#include <vector>

#include "idem/metrics.hpp"

namespace idem {

// Floats are rendered with 9 significant digits; fields containing commas,
// quotes, or newlines get RFC-4180 quoting.
std::string csv_double(double value);
std::string csv_escape(const std::string& field);

inline constexpr const char* kMetricsHeader =
    "seed,episode,steps,return,win,mean_loss,eta_last,delta_bar,change_event";
inline constexpr const char* kEvalHeader = "seed,episode,steps,return,win";
inline constexpr const char* kLossHeader = "step,loss";
inline constexpr const char* kSummaryHeader =
    "variant,avg_winning_steps,win_rate,avg_reward,avg_loss,n_seeds";

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path);
void write_eval_csv(const std::vector<EvalRecord>& records, const std::string& path);
// step indices are global training-step numbers, values the batch losses
void write_losses_csv(const std::vector<long>& steps, const std::vector<double>& losses,
                      const std::string& path);
void write_summary_csv(const std::vector<SummaryRow>& rows, const std::string& path);

} // namespace idem

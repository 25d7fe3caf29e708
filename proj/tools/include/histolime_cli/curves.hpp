#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "histolime/errors.hpp"

namespace histolime::cli {

class EpochLogError : public Error {
 public:
  explicit EpochLogError(const std::string& what)
      : Error(ErrorKind::Input, "EpochLogError: " + what) {}
};

struct EpochRow {
  int epoch = 0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

inline constexpr std::string_view kEpochLogHeader = "epoch,train_acc,val_acc,train_loss,val_loss";

/// CSV with columns (epoch, train_acc, val_acc, train_loss, val_loss) and an
/// optional header line. Epochs must strictly increase, accuracies lie in
/// [0, 1] and losses are >= 0. Errors name the offending line.
std::vector<EpochRow> parse_epoch_log(std::string_view text);

/// Index of the row with the smallest validation loss; ties go to the
/// earliest epoch.
std::size_t best_epoch_index(const std::vector<EpochRow>& rows);

enum class CurveKind { Accuracy, Loss };

/// Line chart of the train and validation series with a marker on `best`.
std::string render_curve_svg(const std::vector<EpochRow>& rows, CurveKind kind, std::size_t best,
                             std::string_view title);

}  // namespace histolime::cli

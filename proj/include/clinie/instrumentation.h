// Counters recording how often upstream predictors run; lets tests assert
// that stage training consumes gold inputs only.

#ifndef CLINIE_INSTRUMENTATION_H_
#define CLINIE_INSTRUMENTATION_H_

#include <atomic>

namespace clinie {

struct PredictionCounters {
  std::atomic<long> entity_predictions{0};
  std::atomic<long> modality_predictions{0};
  std::atomic<long> relation_predictions{0};
};

PredictionCounters& prediction_counters();

}  // namespace clinie

#endif  // CLINIE_INSTRUMENTATION_H_

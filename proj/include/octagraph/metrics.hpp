#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace octagraph {

/// counts[t][p]: rows are true classes, columns predicted classes.
struct ConfusionMatrix {
    int num_classes = 3;
    std::vector<std::vector<long>> counts;

    explicit ConfusionMatrix(int n = 3) : num_classes(n), counts(n, std::vector<long>(n, 0)) {}
    long row_total(int t) const;
    long col_total(int p) const;
    long total() const;
};

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long support = 0;
};

ConfusionMatrix confusion(std::span<const std::pair<int, int>> pairs, int num_classes = 3);

/// Mean per-class recall over classes that have at least one true instance.
double balanced_accuracy(const ConfusionMatrix& m);

/// Balanced accuracy from a list of per-class recalls.
double balanced_accuracy_from_recalls(std::span<const double> recalls);

std::vector<ClassScores> precision_recall_f1(const ConfusionMatrix& m);

/// Healthy stays 0; NPDR and PDR pool to 1 (DR).
std::vector<std::pair<int, int>> pool_binary(std::span<const std::pair<int, int>> pairs);

}  // namespace octagraph

#include "octagraph/metrics.hpp"

#include "octagraph/error.hpp"

#include <string>

namespace octagraph {

long ConfusionMatrix::row_total(int t) const {
    long s = 0;
    for (long v : counts[t]) s += v;
    return s;
}

long ConfusionMatrix::col_total(int p) const {
    long s = 0;
    for (const auto& row : counts) s += row[p];
    return s;
}

long ConfusionMatrix::total() const {
    long s = 0;
    for (int t = 0; t < num_classes; ++t) s += row_total(t);
    return s;
}

ConfusionMatrix confusion(std::span<const std::pair<int, int>> pairs, int num_classes) {
    ConfusionMatrix m(num_classes);
    for (const auto& [t, p] : pairs) {
        if (t < 0 || t >= num_classes || p < 0 || p >= num_classes) {
            throw Error(ErrorCode::OutOfRange, "class pair (" + std::to_string(t) + ", " + std::to_string(p) + ")");
        }
        ++m.counts[t][p];
    }
    return m;
}

double balanced_accuracy(const ConfusionMatrix& m) {
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < m.num_classes; ++c) {
        const long n = m.row_total(c);
        if (n == 0) continue;
        sum += static_cast<double>(m.counts[c][c]) / static_cast<double>(n);
        ++present;
    }
    return present == 0 ? 0.0 : sum / present;
}

double balanced_accuracy_from_recalls(std::span<const double> recalls) {
    if (recalls.empty()) return 0.0;
    double sum = 0.0;
    for (double r : recalls) sum += r;
    return sum / static_cast<double>(recalls.size());
}

std::vector<ClassScores> precision_recall_f1(const ConfusionMatrix& m) {
    std::vector<ClassScores> out(m.num_classes);
    for (int c = 0; c < m.num_classes; ++c) {
        const double tp = static_cast<double>(m.counts[c][c]);
        const long predicted = m.col_total(c);
        const long actual = m.row_total(c);
        ClassScores& s = out[c];
        s.support = actual;
        s.precision = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
        s.recall = actual == 0 ? 0.0 : tp / static_cast<double>(actual);
        s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    }
    return out;
}

std::vector<std::pair<int, int>> pool_binary(std::span<const std::pair<int, int>> pairs) {
    std::vector<std::pair<int, int>> out;
    out.reserve(pairs.size());
    for (const auto& [t, p] : pairs) out.emplace_back(t == 0 ? 0 : 1, p == 0 ? 0 : 1);
    return out;
}

}  // namespace octagraph

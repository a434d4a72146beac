#include "mhyper/eval.hpp"

#include <cstdio>

namespace mhyper {

std::string format_metrics(const Metrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "MRR=%.2f  Hit@1=%.2f  Hit@3=%.2f  Hit@10=%.2f",
                  100.0 * m.mrr, 100.0 * m.hit1, 100.0 * m.hit3, 100.0 * m.hit10);
    return buf;
}

} // namespace mhyper

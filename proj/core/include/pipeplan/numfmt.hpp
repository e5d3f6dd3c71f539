#ifndef PIPEPLAN_NUMFMT_HPP
#define PIPEPLAN_NUMFMT_HPP

#include <cstdio>
#include <cstdlib>

namespace pipeplan {

// Snap a value to 9 significant digits so emitted files are byte-stable.
inline double quantize9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::strtod(buf, nullptr);
}

} // namespace pipeplan

#endif

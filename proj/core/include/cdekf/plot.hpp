#pragma once

#include <string>
#include <vector>

#include "cdekf/bench.hpp"

namespace cdekf {

enum class PlotKind {
    ArmseVsDelta,     // sampling period sweep, linear x
    ArmseVsDeltaIll,  // ill-conditioning sweep, log x
    ArmseVsLambda,    // stiffness sweep, log x
    CpuVsDelta,       // mean wall time against the sampling period
};

/// Renders the report table as a standalone SVG: one polyline per variant
/// with circle marks, log scaling on swept-by-decades axes, gaps where a
/// series diverged, and a legend that flags fully-diverged series.
void emit_plot(const std::vector<RunReport>& reports, PlotKind kind, const std::string& path);

}  // namespace cdekf

#pragma once

namespace meshadv {

/// Selects between the serial reference path and the OpenMP path of a kernel.
///
/// Both paths of every kernel compute bitwise-identical results: parallel
/// loops only fill disjoint per-item slots and reductions run serially in
/// index order. Serial is kept as the reference implementation for tests and
/// the benchmark tool.
enum class Execution { Serial, Parallel };

}  // namespace meshadv

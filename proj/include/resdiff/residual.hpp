#pragma once

#include "resdiff/grid.hpp"

namespace resdiff {

/// Which residual a model learns: the hour-to-hour observation change
/// (Data-Driven) or the forecast error at a given lead (Corrective, Hybrid).
struct ResidualKind {
  enum class Kind { ObservationDelta, ForecastError };
  Kind kind = Kind::ObservationDelta;
  int lead_hours = 1;

  void validate() const;
};

/// mrms_next - mrms_now; the two fields must be one hour apart.
GridField make_delta_target(const GridField& mrms_next, const GridField& mrms_now);

/// Observation minus forecast, both valid at the same hour.
GridField make_error_target(const GridField& mrms_valid, const GridField& hrrr_lead);

/// base + residual, without the non-negativity clamp. Kept for diagnostics.
GridField reconstruct_unclamped(const GridField& base, const GridField& residual);

/// base + residual clamped at zero; the result is a rainfall field valid at
/// the residual's valid time.
GridField reconstruct(const GridField& base, const GridField& residual);

}  // namespace resdiff

#include "resdiff/residual.hpp"

#include <algorithm>
#include <chrono>

#include "resdiff/error.hpp"

namespace resdiff {

namespace {

GridField subtract(const GridField& a, const GridField& b) {
  GridField out = a.like(Variable::Residual);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (a.missing[i] || b.missing[i]) {
      out.set_missing(i);
    } else {
      out.values[i] = a.values[i] - b.values[i];
    }
  }
  return out;
}

}  // namespace

void ResidualKind::validate() const {
  if (kind == Kind::ForecastError && (lead_hours < 1 || lead_hours > 12)) {
    throw_data("residual", "forecast-error lead must be in [1, 12]");
  }
}

GridField make_delta_target(const GridField& mrms_next, const GridField& mrms_now) {
  require_same_geometry(mrms_next, mrms_now, "residual");
  if (mrms_next.valid_time - mrms_now.valid_time != std::chrono::hours{1}) {
    throw_data("residual", "make_delta_target: fields are not consecutive hours (" +
                               format_utc_hour(mrms_now.valid_time) + " -> " +
                               format_utc_hour(mrms_next.valid_time) + ")");
  }
  return subtract(mrms_next, mrms_now);
}

GridField make_error_target(const GridField& mrms_valid, const GridField& hrrr_lead) {
  require_same_geometry(mrms_valid, hrrr_lead, "residual");
  if (mrms_valid.valid_time != hrrr_lead.valid_time) {
    throw_data("residual", "make_error_target: observation valid " + format_utc_hour(mrms_valid.valid_time) +
                               " but forecast valid " + format_utc_hour(hrrr_lead.valid_time));
  }
  return subtract(mrms_valid, hrrr_lead);
}

GridField reconstruct_unclamped(const GridField& base, const GridField& residual) {
  require_same_geometry(base, residual, "residual");
  if (base.variable != Variable::Rainfall) throw_data("residual", "reconstruct: base must be a rainfall field");
  if (residual.variable != Variable::Residual) {
    throw_data("residual", "reconstruct: residual must be residual-tagged");
  }
  GridField out = residual.like(Variable::Residual);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (base.missing[i] || residual.missing[i]) {
      out.set_missing(i);
    } else {
      out.values[i] = base.values[i] + residual.values[i];
    }
  }
  return out;
}

GridField reconstruct(const GridField& base, const GridField& residual) {
  GridField out = reconstruct_unclamped(base, residual);
  out.variable = Variable::Rainfall;
  out.units = std::string(default_units(Variable::Rainfall));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out.missing[i]) out.values[i] = std::max(out.values[i], 0.0);
  }
  return out;
}

}  // namespace resdiff

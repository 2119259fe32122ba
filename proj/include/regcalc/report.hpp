#pragma once

// JSON views of module results for run reports.

#include <cmath>
#include <string>
#include <vector>

#include "regcalc/config.hpp"

namespace regcalc::report {

using Json = nlohmann::ordered_json;

/// Non-finite values become the strings "inf", "-inf" and "nan".
inline Json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline Json point(const std::vector<double>& p) {
  Json out = Json::array();
  for (double v : p) out.push_back(number(v));
  return out;
}

inline Json box(const Box& b) { return Json{{"lo", point(b.lo)}, {"hi", point(b.hi)}}; }

inline std::string verdict(Verdict v) {
  switch (v) {
    case Verdict::member: return "pass";
    case Verdict::not_member: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

inline std::string verdict(bool passed) { return passed ? "pass" : "fail"; }

inline Json evidence(const NormEvidence& e) {
  Json vals = Json::array();
  for (double v : e.values) vals.push_back(number(v));
  Json out{{"what", e.what}, {"intervals", e.intervals}, {"values", vals}, {"verdict", verdict_name(e.verdict)}};
  if (!e.error.empty()) out["error"] = e.error;
  return out;
}

inline Json index_claim(const IndexClaim& c, bool with_evidence) {
  Json out{{"i", to_string(c.i)},
           {"b_space", c.b_space},
           {"c_space", c.c_space},
           {"b", verdict_name(c.b)},
           {"c", verdict_name(c.c)},
           {"verdict", verdict_name(c.verdict)}};
  if (with_evidence) {
    Json ev = Json::array();
    for (const auto& e : c.evidence) ev.push_back(evidence(e));
    out["evidence"] = ev;
  }
  return out;
}

inline Json membership(const MembershipClaim& m, bool with_evidence = false) {
  Json per = Json::array();
  for (const auto& c : m.per_index) per.push_back(index_claim(c, with_evidence));
  return Json{{"function", m.function}, {"domain", m.domain}, {"per_index", per}, {"verdict", verdict_name(m.verdict)}};
}

inline Json law_case(const LawCase& c) {
  auto opt = [](const std::optional<Index>& v) -> Json { return v ? Json(to_string(*v)) : Json(nullptr); };
  return Json{{"law", law_name(c.law)},
              {"i", to_string(c.i)},
              {"j", to_string(c.j)},
              {"k", to_string(c.k)},
              {"lhs", opt(c.lhs)},
              {"rhs", opt(c.rhs)}};
}

inline Json laws(const LawReport& r) {
  Json v = Json::array(), p = Json::array();
  for (const auto& c : r.violations) v.push_back(law_case(c));
  for (const auto& c : r.partial) p.push_back(law_case(c));
  return Json{{"triples_checked", r.triples_checked},
              {"exhaustive", r.exhaustive},
              {"violations", v},
              {"partial", p.size()},
              {"first_partial", r.partial.empty() ? Json(nullptr) : law_case(r.partial.front())}};
}

inline Json residual_record(const ResidualRecord& r) {
  Json out{{"charts", r.charts},
           {"max_residual", number(r.max_residual)},
           {"worst_point", point(r.worst_point)},
           {"samples", r.samples}};
  if (!r.note.empty()) out["note"] = r.note;
  return out;
}

inline Json atlas_report(const AtlasReport& r) {
  Json inv = Json::array(), coc = Json::array();
  for (const auto& x : r.inverse) inv.push_back(residual_record(x));
  for (const auto& x : r.cocycle) coc.push_back(residual_record(x));
  return Json{{"inverse", inv},
              {"cocycle", coc},
              {"max_residual", number(r.max_residual())},
              {"tolerance", r.tolerance},
              {"verdict", verdict(r.passed())}};
}

inline Json structure_report(const StructureReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries)
    entries.push_back(Json{{"from", e.from},
                           {"to", e.to},
                           {"piece", e.piece},
                           {"component", e.component + 1},
                           {"claim", membership(e.claim)}});
  return Json{{"entries", entries}, {"verdict", verdict(r.verdict())}};
}

inline Json partition_report(const PartitionReport& r, double tol) {
  Json out{{"samples", r.samples},
           {"max_sum_error", number(r.max_sum_error)},
           {"sum_chart", r.sum_chart},
           {"sum_point", point(r.sum_point)},
           {"min_value", number(r.min_value)},
           {"supports_interior", r.supports_interior},
           {"tolerance", tol}};
  if (!r.supports_interior) out["support_violation"] = Json{{"chart", r.support_chart}, {"point", point(r.support_witness)}};
  if (!r.error.empty()) out["error"] = r.error;
  out["verdict"] = verdict(r.passed(tol));
  return out;
}

inline Json transformation(const TransformationReport& r) {
  Json ov = Json::array();
  for (const auto& o : r.overlaps)
    ov.push_back(Json{{"from", o.from},
                      {"to", o.to},
                      {"max_residual", number(o.max_residual)},
                      {"worst_point", point(o.worst_point)},
                      {"component", o.component},
                      {"samples", o.samples}});
  return Json{{"overlaps", ov},
              {"max_residual", number(r.max_residual())},
              {"tolerance", r.tolerance},
              {"verdict", verdict(r.passed())}};
}

inline Json globalized(const GlobalizedClaim& c) {
  Json derived = Json::array();
  for (const auto& d : c.derived) derived.push_back(index_claim(d, false));
  return Json{{"X", c.X.describe()},
              {"source", verdict_name(c.source)},
              {"source_spaces", c.source_spaces},
              {"xi", c.xi},
              {"derived", derived},
              {"verdict", verdict_name(c.verdict)}};
}

inline Json witnesses(const WitnessReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    Json j{{"chart", e.chart},
           {"c", e.c + 1},
           {"a", e.a + 1},
           {"b", e.b + 1},
           {"outcome", outcome_name(e.outcome)},
           {"box", e.box ? box(*e.box) : Json(nullptr)},
           {"seed", point(e.seed)},
           {"min_difference", number(e.min_difference)}};
    if (!e.reason.empty()) j["reason"] = e.reason;
    entries.push_back(std::move(j));
  }
  return Json{{"entries", entries}, {"all_found", r.all_found()}};
}

inline Json residuals(const std::vector<ResidualEntry>& rs) {
  Json out = Json::array();
  for (const auto& r : rs)
    out.push_back(Json{{"chart", r.chart}, {"c", r.c + 1}, {"sup", number(r.sup)}, {"point", point(r.point)}});
  return out;
}

}  // namespace regcalc::report

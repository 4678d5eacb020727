#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "svyimp/frame.hpp"

namespace svyimp::testing {

/// Balanced hierarchy: parents x subsidiaries x practices plus independent
/// practices. Practice sizes cycle so PPS has unequal measures; outcomes are
/// the practice id scaled to [0, 1).
inline Frame toy_frame(std::int64_t n_parents, std::int64_t subs_per_parent,
                       std::int64_t practices_per_sub, std::int64_t n_independent = 0,
                       std::size_t outcome_count = 1) {
  Frame f;
  f.generation_config.n_parents = n_parents;
  f.generation_config.n_independent_practices = n_independent;
  f.generation_config.outcome_count = static_cast<std::int64_t>(outcome_count);
  const auto total = n_parents * subs_per_parent * practices_per_sub + n_independent;
  auto add_practice = [&](std::optional<std::int64_t> os) {
    Practice p;
    p.id = static_cast<std::int64_t>(f.practices.size());
    p.os_id = os;
    p.npcp = 3 + p.id % 4;
    p.np = p.npcp + 1;
    p.tin = std::to_string(100000000 + p.id);
    for (std::size_t m = 0; m < outcome_count; ++m)
      p.true_outcomes.push_back(static_cast<double>(p.id + static_cast<std::int64_t>(m)) /
                                static_cast<double>(total));
    f.practices.push_back(p);
  };
  for (std::int64_t i = 0; i < n_parents; ++i) {
    CorporateParent parent;
    parent.id = i;
    parent.nos = subs_per_parent;
    parent.nach = i;
    parent.nmg = 1;
    parent.pertot = 0.5;
    f.parents.push_back(parent);
    for (std::int64_t s = 0; s < subs_per_parent; ++s) {
      OwnerSubsidiary sub;
      sub.id = static_cast<std::int64_t>(f.subsidiaries.size());
      sub.parent_id = i;
      f.subsidiaries.push_back(sub);
      for (std::int64_t k = 0; k < practices_per_sub; ++k) add_practice(sub.id);
    }
  }
  for (std::int64_t k = 0; k < n_independent; ++k) add_practice(std::nullopt);
  f.index();
  f.validate();
  return f;
}

}  // namespace svyimp::testing

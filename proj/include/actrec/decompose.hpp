#pragma once

#include <vector>

#include "actrec/resync.hpp"
#include "actrec/types.hpp"

namespace actrec {

// Outcome of greedy selection over a residual table.  Column c of lambda lists
// how many copies of each atom reconstruct operation c; columns that could not
// be decomposed are the canonical vector e_c and count as sources.
struct Representation {
  int base = 2;
  double tau = 0.0;
  MatI lambda;               // (atom, operation) multiplicity
  VecD residuals;            // chosen residual per column, 0 for sources
  std::vector<VecD> shifts;  // one shift per instance of the final column
  std::vector<long> chosen;  // selected combination index, -1 for sources
  std::vector<int> sources;  // irreducible atom indices, ascending

  int num_atoms() const { return static_cast<int>(chosen.size()); }
  int num_sources() const { return static_cast<int>(sources.size()); }
  bool is_irreducible(int c) const { return chosen[static_cast<size_t>(c)] < 0; }
};

// Per operation: among computed residuals <= tau pick the fewest constituents,
// ties by lower residual, then lower combination index.  Chained picks are
// re-expanded to a fixed point so final columns reference only sources.
Representation greedy_select(const ResidualMatrix& r, double tau);

// Sum of the stored column: each instance of the final column shifted by its
// stored offset.  Source columns return the atom spectrum itself.
VecC reconstruct_column(const Representation& rep, const CentroidSet& c, int col);

// Multi-hot activation rows, one per source, ascending atom index.  Base 2
// clips to {0,1}; higher bases keep multiplicities.  Unlabeled frames stay
// all-zero.
MatI recover_activations(const Representation& rep, const LabelMatrix& labels);

struct SourceCatalog {
  std::vector<std::vector<int>> groups;  // merged sources, each ascending
  std::vector<int> group_of;             // per atom, -1 when not a source
  MatI source_map;                       // (group, operation) multiplicity

  int num_sources() const { return static_cast<int>(groups.size()); }
};

// Sources whose pairwise resynchronized residual (either direction) stays
// within rep.tau collapse into one catalog entry.
SourceCatalog merge_configurations(const Representation& rep, const CentroidSet& c,
                                   const MultistartOptions& opt = {});

}  // namespace actrec

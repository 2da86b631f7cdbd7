#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mfsbm {

/// 0/1 entry vectors; position indices and map values are 1-based throughout,
/// matching the combinatorial definitions.
using Bits = std::vector<std::uint8_t>;

/// Pair [alpha, beta] indexing one coalescence pattern at depth nprime:
/// alpha has length n, beta length nprime, with
///   (i) beta's last entry is 0 (when nprime >= 1),
///   (ii) |alpha| + |beta| == 2 * nprime.
/// At nprime == 0 the pair is [all-zeros, empty].
struct IndexPair {
  Bits alpha;
  Bits beta;

  bool operator==(const IndexPair&) const = default;
};

/// Pair plus a slot-to-label map tau : {1..2 nprime} -> {1..nprime}.
/// Slots 1..|alpha| are attached to the ones of alpha (in increasing position
/// order), slots |alpha|+1..2 nprime to the ones of beta.  Constraints:
///   (i) every label is attained exactly twice,
///   (ii) on a beta slot the label exceeds the beta position it is attached to.
/// A consequence worth remembering: both slots with label 1 are alpha slots.
struct IndexTriple {
  Bits alpha;
  Bits beta;
  std::vector<int> tau;

  bool operator==(const IndexTriple&) const = default;
};

/// Number of ones.
int popcount(const Bits& bits);

/// Increasing enumeration of 1-positions (1-based values).
std::vector<int> one_positions(const Bits& bits);

/// Membership checks; on failure `why` (if non-null) receives the violated
/// condition.
bool is_valid_pair(int n, int nprime, const IndexPair& pair, std::string* why = nullptr);
bool is_valid_triple(int n, int nprime, const IndexTriple& triple, std::string* why = nullptr);

/// All pairs for (n, nprime) in display order: bit vectors compared
/// position by position with 1 ordered before 0.  Throws DomainError for
/// nprime outside [0, n-1], CapacityError for n above the enumeration cap.
std::vector<IndexPair> enumerate_index_pairs(int n, int nprime);

/// All admissible tau maps for one pair, ascending lexicographic on the
/// flattened value tuple (tau(1), ..., tau(2 nprime)).
std::vector<std::vector<int>> enumerate_tau(int n, int nprime, const IndexPair& pair);

/// All triples, pairs in display order and tau maps ascending within a pair.
std::vector<IndexTriple> enumerate_triples(int n, int nprime);

/// Streaming enumeration in the same order; avoids materialising large lists.
void for_each_triple(int n, int nprime, const std::function<void(const IndexTriple&)>& fn);

/// Closed-form count n!(n-1)! / (2^nprime (n-nprime)! (n-nprime-1)!), computed
/// exactly as the telescoping product of (n-m)(n-m-1)/2 factors.  Throws
/// NumericError on 128-bit overflow.
unsigned __int128 count_triples(int n, int nprime);

std::string u128_to_string(unsigned __int128 v);

/// One step of the depth-reducing bijection: a triple at (n, nprime >= 1)
/// maps to a position pair 1 <= i < j <= n plus a triple at (n-1, nprime-1).
/// The two alpha slots carrying label 1 are removed (their alpha positions are
/// i and j), beta's first entry migrates to the back of alpha, and the
/// remaining labels shift down by one.
struct BijectionStep {
  int i = 0;
  int j = 0;
  IndexTriple reduced;
};

BijectionStep bijection_forward(int n, int nprime, const IndexTriple& triple);

IndexTriple bijection_inverse(int n, int nprime, int i, int j, const IndexTriple& reduced);

} // namespace mfsbm

#include "mfsbm/index_set.hpp"

#include <algorithm>
#include <sstream>

#include "mfsbm/error.hpp"

namespace mfsbm {

namespace {

constexpr int kEnumerationCap = 12;

void check_depth(int n, int nprime) {
  if (n < 1) throw DomainError("index set: n must be >= 1");
  if (nprime < 0 || nprime > n - 1) {
    std::ostringstream msg;
    msg << "index set: depth " << nprime << " outside [0, " << (n - 1) << "]";
    throw DomainError(msg.str());
  }
}

void next_in_display_order(Bits& bits, bool& done) {
  // Display order enumerates the all-ones vector first and all-zeros last;
  // stepping means binary decrement on the vector read as a number with the
  // first entry most significant.
  for (int k = static_cast<int>(bits.size()) - 1; k >= 0; --k) {
    if (bits[k] == 1) {
      bits[k] = 0;
      for (std::size_t m = k + 1; m < bits.size(); ++m) bits[m] = 1;
      return;
    }
  }
  done = true;
}

struct TauEnumerator {
  int n_slots;                      // 2 * nprime
  int n_labels;                     // nprime
  int n_alpha;                      // |alpha|: slots 1..n_alpha are alpha slots
  std::vector<int> beta_pos;        // one_positions(beta)
  std::vector<int> count;           // per label, assignments so far
  std::vector<int> remaining_elig;  // per label, eligible slots at index > current
  std::vector<int> tau;
  const std::function<void(const std::vector<int>&)>* emit;

  bool eligible(int slot, int label) const {
    if (slot <= n_alpha) return true;
    return label > beta_pos[slot - n_alpha - 1];
  }

  void run(int slot) {
    if (slot > n_slots) {
      (*emit)(tau);
      return;
    }
    // Feasibility: every label still short of two uses must have enough
    // eligible slots left, counting this one.
    for (int label = 1; label <= n_labels; ++label) {
      const int need = 2 - count[label];
      if (need > 0 && remaining_elig[label] < need) return;
    }
    for (int label = 1; label <= n_labels; ++label) {
      if (count[label] == 2 || !eligible(slot, label)) continue;
      count[label] += 1;
      tau[slot - 1] = label;
      // Slot consumed: it is no longer "remaining" for anyone.
      for (int m = 1; m <= n_labels; ++m) {
        if (eligible(slot, m)) remaining_elig[m] -= 1;
      }
      run(slot + 1);
      for (int m = 1; m <= n_labels; ++m) {
        if (eligible(slot, m)) remaining_elig[m] += 1;
      }
      count[label] -= 1;
    }
  }
};

void enumerate_tau_into(int nprime, const IndexPair& pair,
                        const std::function<void(const std::vector<int>&)>& emit) {
  if (nprime == 0) {
    static const std::vector<int> empty;
    emit(empty);
    return;
  }
  TauEnumerator e;
  e.n_slots = 2 * nprime;
  e.n_labels = nprime;
  e.n_alpha = popcount(pair.alpha);
  e.beta_pos = one_positions(pair.beta);
  e.count.assign(nprime + 1, 0);
  e.remaining_elig.assign(nprime + 1, 0);
  for (int label = 1; label <= nprime; ++label) {
    for (int slot = 1; slot <= e.n_slots; ++slot) {
      if (e.eligible(slot, label)) e.remaining_elig[label] += 1;
    }
  }
  e.tau.assign(e.n_slots, 0);
  e.emit = &emit;
  e.run(1);
}

} // namespace

int popcount(const Bits& bits) {
  int c = 0;
  for (auto b : bits) c += (b != 0);
  return c;
}

std::vector<int> one_positions(const Bits& bits) {
  std::vector<int> pos;
  for (std::size_t k = 0; k < bits.size(); ++k) {
    if (bits[k]) pos.push_back(static_cast<int>(k) + 1);
  }
  return pos;
}

bool is_valid_pair(int n, int nprime, const IndexPair& pair, std::string* why) {
  auto fail = [&](const std::string& reason) {
    if (why) *why = reason;
    return false;
  };
  if (static_cast<int>(pair.alpha.size()) != n) return fail("alpha length != n");
  if (static_cast<int>(pair.beta.size()) != nprime) return fail("beta length != depth");
  for (auto b : pair.alpha) {
    if (b > 1) return fail("alpha entries must be 0/1");
  }
  for (auto b : pair.beta) {
    if (b > 1) return fail("beta entries must be 0/1");
  }
  if (nprime >= 1 && pair.beta.back() != 0) return fail("beta must end in 0");
  if (popcount(pair.alpha) + popcount(pair.beta) != 2 * nprime) {
    return fail("|alpha| + |beta| != 2 * depth");
  }
  return true;
}

bool is_valid_triple(int n, int nprime, const IndexTriple& triple, std::string* why) {
  IndexPair pair{triple.alpha, triple.beta};
  if (!is_valid_pair(n, nprime, pair, why)) return false;
  auto fail = [&](const std::string& reason) {
    if (why) *why = reason;
    return false;
  };
  if (static_cast<int>(triple.tau.size()) != 2 * nprime) return fail("tau length != 2 * depth");
  std::vector<int> count(nprime + 1, 0);
  const int n_alpha = popcount(triple.alpha);
  const auto beta_pos = one_positions(triple.beta);
  for (int slot = 1; slot <= 2 * nprime; ++slot) {
    const int label = triple.tau[slot - 1];
    if (label < 1 || label > nprime) return fail("tau value out of range");
    count[label] += 1;
    if (slot > n_alpha && label <= beta_pos[slot - n_alpha - 1]) {
      return fail("beta-slot label must exceed its attachment position");
    }
  }
  for (int label = 1; label <= nprime; ++label) {
    if (count[label] != 2) return fail("every label must be attained exactly twice");
  }
  return true;
}

std::vector<IndexPair> enumerate_index_pairs(int n, int nprime) {
  check_depth(n, nprime);
  if (n > kEnumerationCap) {
    throw CapacityError("enumerate_index_pairs: n above enumeration cap");
  }
  std::vector<IndexPair> out;
  Bits alpha(n, 1);
  bool alpha_done = false;
  while (!alpha_done) {
    if (popcount(alpha) <= 2 * nprime && 2 * nprime - popcount(alpha) <= std::max(nprime - 1, 0)) {
      Bits beta(nprime, 1);
      bool beta_done = false;
      if (nprime == 0) {
        IndexPair pair{alpha, beta};
        if (is_valid_pair(n, nprime, pair)) out.push_back(pair);
      } else {
        while (!beta_done) {
          IndexPair pair{alpha, beta};
          if (is_valid_pair(n, nprime, pair)) out.push_back(pair);
          next_in_display_order(beta, beta_done);
        }
      }
    }
    next_in_display_order(alpha, alpha_done);
  }
  return out;
}

std::vector<std::vector<int>> enumerate_tau(int n, int nprime, const IndexPair& pair) {
  check_depth(n, nprime);
  std::string why;
  if (!is_valid_pair(n, nprime, pair, &why)) {
    throw DomainError("enumerate_tau: invalid pair: " + why);
  }
  std::vector<std::vector<int>> out;
  enumerate_tau_into(nprime, pair, [&](const std::vector<int>& tau) { out.push_back(tau); });
  return out;
}

void for_each_triple(int n, int nprime, const std::function<void(const IndexTriple&)>& fn) {
  const auto pairs = enumerate_index_pairs(n, nprime);
  IndexTriple triple;
  for (const auto& pair : pairs) {
    triple.alpha = pair.alpha;
    triple.beta = pair.beta;
    enumerate_tau_into(nprime, pair, [&](const std::vector<int>& tau) {
      triple.tau = tau;
      fn(triple);
    });
  }
}

std::vector<IndexTriple> enumerate_triples(int n, int nprime) {
  std::vector<IndexTriple> out;
  for_each_triple(n, nprime, [&](const IndexTriple& t) { out.push_back(t); });
  return out;
}

unsigned __int128 count_triples(int n, int nprime) {
  check_depth(n, nprime);
  unsigned __int128 total = 1;
  for (int m = 0; m < nprime; ++m) {
    const unsigned __int128 factor =
        static_cast<unsigned __int128>(n - m) * static_cast<unsigned __int128>(n - m - 1) / 2;
    const unsigned __int128 next = total * factor;
    if (factor != 0 && next / factor != total) {
      throw NumericError("count_triples: 128-bit overflow", 0.0, 0.0);
    }
    total = next;
  }
  return total;
}

std::string u128_to_string(unsigned __int128 v) {
  if (v == 0) return "0";
  std::string s;
  while (v > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

BijectionStep bijection_forward(int n, int nprime, const IndexTriple& triple) {
  if (nprime < 1) throw DomainError("bijection_forward: needs depth >= 1");
  std::string why;
  if (!is_valid_triple(n, nprime, triple, &why)) {
    throw DomainError("bijection_forward: invalid triple: " + why);
  }
  const auto alpha_pos = one_positions(triple.alpha);
  int j1 = 0, j2 = 0; // 1-based slots carrying label 1; both are alpha slots
  for (int slot = 1; slot <= 2 * nprime; ++slot) {
    if (triple.tau[slot - 1] == 1) {
      if (j1 == 0) {
        j1 = slot;
      } else {
        j2 = slot;
      }
    }
  }
  BijectionStep step;
  step.i = alpha_pos[j1 - 1];
  step.j = alpha_pos[j2 - 1];

  // alpha: drop the two positions, append beta's first entry.
  Bits alpha2;
  alpha2.reserve(n - 1);
  for (int pos = 1; pos <= n; ++pos) {
    if (pos == step.i || pos == step.j) continue;
    alpha2.push_back(triple.alpha[pos - 1]);
  }
  alpha2.push_back(triple.beta.front());

  Bits beta2(triple.beta.begin() + 1, triple.beta.end());

  // tau: drop slots j1 and j2, shift every remaining label down by one.
  std::vector<int> tau2;
  tau2.reserve(2 * nprime - 2);
  for (int slot = 1; slot <= 2 * nprime; ++slot) {
    if (slot == j1 || slot == j2) continue;
    tau2.push_back(triple.tau[slot - 1] - 1);
  }

  step.reduced = IndexTriple{std::move(alpha2), std::move(beta2), std::move(tau2)};
  return step;
}

IndexTriple bijection_inverse(int n, int nprime, int i, int j, const IndexTriple& reduced) {
  if (nprime < 1) throw DomainError("bijection_inverse: needs depth >= 1");
  if (!(1 <= i && i < j && j <= n)) {
    throw DomainError("bijection_inverse: needs 1 <= i < j <= n");
  }
  std::string why;
  if (!is_valid_triple(n - 1, nprime - 1, reduced, &why)) {
    throw DomainError("bijection_inverse: invalid reduced triple: " + why);
  }

  // beta regains its first entry from the back of the reduced alpha.
  Bits beta(nprime, 0);
  beta[0] = reduced.alpha.back();
  std::copy(reduced.beta.begin(), reduced.beta.end(), beta.begin() + 1);

  // alpha: reduced alpha minus its appended entry, with ones inserted at i, j.
  Bits alpha(n, 0);
  std::size_t src = 0;
  for (int pos = 1; pos <= n; ++pos) {
    if (pos == i || pos == j) {
      alpha[pos - 1] = 1;
    } else {
      alpha[pos - 1] = reduced.alpha[src++];
    }
  }

  // Slots of the restored label 1 are the ranks of i and j among alpha's ones.
  const auto alpha_pos = one_positions(alpha);
  const int j1 = static_cast<int>(std::lower_bound(alpha_pos.begin(), alpha_pos.end(), i) -
                                  alpha_pos.begin()) + 1;
  const int j2 = static_cast<int>(std::lower_bound(alpha_pos.begin(), alpha_pos.end(), j) -
                                  alpha_pos.begin()) + 1;

  std::vector<int> tau;
  tau.reserve(2 * nprime);
  for (int v : reduced.tau) tau.push_back(v + 1);
  tau.insert(tau.begin() + (j1 - 1), 1);
  tau.insert(tau.begin() + (j2 - 1), 1);

  IndexTriple triple{std::move(alpha), std::move(beta), std::move(tau)};
  if (!is_valid_triple(n, nprime, triple, &why)) {
    throw DomainError("bijection_inverse: produced invalid triple: " + why);
  }
  return triple;
}

} // namespace mfsbm

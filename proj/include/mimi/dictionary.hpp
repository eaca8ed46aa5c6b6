#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mimi/types.hpp"

namespace mimi {

enum class DictionaryKind { GroupEffects, RowColumn, Corruptions, Custom };

struct AtomEntry {
  Eigen::Index row;
  Eigen::Index col;
  double value;
};

using Cell = std::pair<Eigen::Index, Eigen::Index>;

/// Structural constants of a dictionary.
///   u_max     max_k ‖U^k‖₁ (entrywise)
///   u_overlap max_{ij} Σ_k |U^k_ij|
///   kappa_sq  lower bound on αᵀGα/‖α‖² for the Gram matrix G
///   tau       max_k Σ_{l≠k} |⟨U^k, U^l⟩|
struct DictionaryMetadata {
  double u_max;
  double u_overlap;
  double kappa_sq;
  double tau;
};

/// The main-effects design {U¹,…,Uᴺ}.
///
/// Built-in structures never materialize their atoms: apply/adjoint and the
/// per-atom visitor are index arithmetic. Custom atoms are kept as sparse
/// triplets with values in [−1, 1].
///
/// Atom order:
///   GroupEffects  k = h·m2 + q   (group h, column q)
///   RowColumn     k < m1 is row k, k = m1 + j is column j
///   Corruptions   order of the supplied cell list
class Dictionary {
 public:
  /// `assignment[i]` is the 0-based group of row i; every group in
  /// [0, max] must be non-empty.
  static Dictionary group_effects(Eigen::Index m1, Eigen::Index m2,
                                  std::vector<int> assignment);
  static Dictionary row_column(Eigen::Index m1, Eigen::Index m2);
  static Dictionary corruptions(Eigen::Index m1, Eigen::Index m2, std::vector<Cell> cells);
  static Dictionary custom(Eigen::Index m1, Eigen::Index m2,
                           std::vector<std::vector<AtomEntry>> atoms);
  /// No main effects at all (N = 0).
  static Dictionary none(Eigen::Index m1, Eigen::Index m2);

  DictionaryKind kind() const noexcept { return kind_; }
  Eigen::Index size() const noexcept { return n_atoms_; }
  Eigen::Index rows() const noexcept { return m1_; }
  Eigen::Index cols() const noexcept { return m2_; }

  /// f_U(α) = Σ_k α_k U^k.
  Matrix apply(const Vector& alpha) const;
  /// k-th entry ⟨U^k, G⟩.
  Vector adjoint(const Matrix& G) const;
  /// Σ_ij W_ij f_U(α)_ij².
  double gram_quadratic(const Vector& alpha, const Matrix& W) const;

  /// Calls f(i, j, value) for every nonzero entry of atom k.
  template <class F>
  void for_each_entry(Eigen::Index k, F&& f) const;

  double u_overlap() const noexcept { return u_overlap_; }
  /// Custom dictionaries are handled by brute force and refuse more than
  /// `atom_cap` atoms.
  DictionaryMetadata metadata(std::size_t atom_cap = 100000) const;

  Matrix dense_atom(Eigen::Index k) const;

  int n_groups() const noexcept { return static_cast<int>(members_.size()); }
  const std::vector<int>& assignment() const noexcept { return assignment_; }
  const std::vector<std::vector<Eigen::Index>>& group_members() const noexcept { return members_; }
  const std::vector<Cell>& cells() const noexcept { return cells_; }
  const std::vector<std::vector<AtomEntry>>& atoms() const noexcept { return atoms_; }

  /// Dictionary on the row-permuted grid: row i of the result corresponds to
  /// row perm[i] of this dictionary.
  Dictionary permuted_rows(std::span<const Eigen::Index> perm) const;

 private:
  Dictionary() = default;

  DictionaryKind kind_ = DictionaryKind::Custom;
  Eigen::Index m1_ = 0;
  Eigen::Index m2_ = 0;
  Eigen::Index n_atoms_ = 0;
  double u_overlap_ = 0.0;
  std::vector<int> assignment_;
  std::vector<std::vector<Eigen::Index>> members_;
  std::vector<Cell> cells_;
  std::vector<std::vector<AtomEntry>> atoms_;
};

template <class F>
void Dictionary::for_each_entry(Eigen::Index k, F&& f) const {
  switch (kind_) {
    case DictionaryKind::GroupEffects: {
      const Eigen::Index h = k / m2_;
      const Eigen::Index q = k % m2_;
      for (Eigen::Index i : members_[static_cast<std::size_t>(h)]) f(i, q, 1.0);
      break;
    }
    case DictionaryKind::RowColumn:
      if (k < m1_) {
        for (Eigen::Index j = 0; j < m2_; ++j) f(k, j, 1.0);
      } else {
        for (Eigen::Index i = 0; i < m1_; ++i) f(i, k - m1_, 1.0);
      }
      break;
    case DictionaryKind::Corruptions: {
      const auto& c = cells_[static_cast<std::size_t>(k)];
      f(c.first, c.second, 1.0);
      break;
    }
    case DictionaryKind::Custom:
      for (const auto& e : atoms_[static_cast<std::size_t>(k)]) f(e.row, e.col, e.value);
      break;
  }
}

/// {"type":"groups","assignment":[...]} | {"type":"rowcol"} |
/// {"type":"corruptions","cells":[[i,j],...]} |
/// {"type":"custom","atoms":[[[i,j,v],...],...]} | {"type":"none"}
Dictionary parse_dictionary(const nlohmann::json& j, Eigen::Index m1, Eigen::Index m2);
Dictionary read_dictionary(const std::filesystem::path& path, Eigen::Index m1, Eigen::Index m2);
nlohmann::json dictionary_to_json(const Dictionary& dict);

}  // namespace mimi

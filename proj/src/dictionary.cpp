#include "mimi/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include <Eigen/Eigenvalues>

#include "mimi/error.hpp"

namespace mimi {

namespace {

void check_shape(Eigen::Index m1, Eigen::Index m2) {
  if (m1 <= 0 || m2 <= 0) throw ShapeError("dictionary shape must be positive");
}

void check_cell(Eigen::Index m1, Eigen::Index m2, Eigen::Index i, Eigen::Index j) {
  if (i < 0 || i >= m1 || j < 0 || j >= m2)
    throw InvalidInput("cell (" + std::to_string(i) + ", " + std::to_string(j) +
                       ") outside a " + std::to_string(m1) + "x" + std::to_string(m2) + " grid");
}

// Above this many atoms the Gram minimum eigenvalue is replaced by its
// Gershgorin lower bound.
constexpr Eigen::Index kDenseGramLimit = 2000;

}  // namespace

Dictionary Dictionary::group_effects(Eigen::Index m1, Eigen::Index m2,
                                     std::vector<int> assignment) {
  check_shape(m1, m2);
  if (static_cast<Eigen::Index>(assignment.size()) != m1)
    throw ShapeError("group assignment has " + std::to_string(assignment.size()) +
                     " entries for " + std::to_string(m1) + " rows");
  int n_groups = 0;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] < 0)
      throw InvalidInput("row " + std::to_string(i) + " is not assigned to a group");
    n_groups = std::max(n_groups, assignment[i] + 1);
  }
  Dictionary d;
  d.kind_ = DictionaryKind::GroupEffects;
  d.m1_ = m1;
  d.m2_ = m2;
  d.members_.assign(static_cast<std::size_t>(n_groups), {});
  for (std::size_t i = 0; i < assignment.size(); ++i)
    d.members_[static_cast<std::size_t>(assignment[i])].push_back(static_cast<Eigen::Index>(i));
  for (int h = 0; h < n_groups; ++h)
    if (d.members_[static_cast<std::size_t>(h)].empty())
      throw InvalidInput("group " + std::to_string(h) + " has no rows");
  d.assignment_ = std::move(assignment);
  d.n_atoms_ = static_cast<Eigen::Index>(n_groups) * m2;
  d.u_overlap_ = 1.0;
  return d;
}

Dictionary Dictionary::row_column(Eigen::Index m1, Eigen::Index m2) {
  check_shape(m1, m2);
  Dictionary d;
  d.kind_ = DictionaryKind::RowColumn;
  d.m1_ = m1;
  d.m2_ = m2;
  d.n_atoms_ = m1 + m2;
  d.u_overlap_ = 2.0;
  return d;
}

Dictionary Dictionary::corruptions(Eigen::Index m1, Eigen::Index m2, std::vector<Cell> cells) {
  check_shape(m1, m2);
  std::set<Cell> seen;
  for (const auto& c : cells) {
    check_cell(m1, m2, c.first, c.second);
    if (!seen.insert(c).second)
      throw InvalidInput("duplicate corruption cell (" + std::to_string(c.first) + ", " +
                         std::to_string(c.second) + ")");
  }
  Dictionary d;
  d.kind_ = DictionaryKind::Corruptions;
  d.m1_ = m1;
  d.m2_ = m2;
  d.n_atoms_ = static_cast<Eigen::Index>(cells.size());
  d.u_overlap_ = cells.empty() ? 0.0 : 1.0;
  d.cells_ = std::move(cells);
  return d;
}

Dictionary Dictionary::custom(Eigen::Index m1, Eigen::Index m2,
                              std::vector<std::vector<AtomEntry>> atoms) {
  check_shape(m1, m2);
  Matrix overlap = Matrix::Zero(m1, m2);
  for (std::size_t k = 0; k < atoms.size(); ++k) {
    std::set<Cell> seen;
    for (const auto& e : atoms[k]) {
      check_cell(m1, m2, e.row, e.col);
      if (!(std::abs(e.value) <= 1.0))
        throw InvalidInput("atom " + std::to_string(k) + " has entry " + std::to_string(e.value) +
                           " outside [-1, 1]");
      if (!seen.insert({e.row, e.col}).second)
        throw InvalidInput("atom " + std::to_string(k) + " repeats a cell");
      overlap(e.row, e.col) += std::abs(e.value);
    }
  }
  Dictionary d;
  d.kind_ = DictionaryKind::Custom;
  d.m1_ = m1;
  d.m2_ = m2;
  d.n_atoms_ = static_cast<Eigen::Index>(atoms.size());
  d.u_overlap_ = overlap.maxCoeff();
  d.atoms_ = std::move(atoms);
  return d;
}

Dictionary Dictionary::none(Eigen::Index m1, Eigen::Index m2) { return custom(m1, m2, {}); }

Matrix Dictionary::apply(const Vector& alpha) const {
  if (alpha.size() != n_atoms_)
    throw ShapeError("coefficient vector has length " + std::to_string(alpha.size()) +
                     ", dictionary has " + std::to_string(n_atoms_) + " atoms");
  Matrix out = Matrix::Zero(m1_, m2_);
  switch (kind_) {
    case DictionaryKind::GroupEffects:
      for (Eigen::Index j = 0; j < m2_; ++j)
        for (Eigen::Index i = 0; i < m1_; ++i)
          out(i, j) = alpha(assignment_[static_cast<std::size_t>(i)] * m2_ + j);
      break;
    case DictionaryKind::RowColumn:
      for (Eigen::Index j = 0; j < m2_; ++j)
        for (Eigen::Index i = 0; i < m1_; ++i) out(i, j) = alpha(i) + alpha(m1_ + j);
      break;
    default:
      for (Eigen::Index k = 0; k < n_atoms_; ++k) {
        const double a = alpha(k);
        if (a == 0.0) continue;
        for_each_entry(k, [&](Eigen::Index i, Eigen::Index j, double v) { out(i, j) += a * v; });
      }
      break;
  }
  return out;
}

Vector Dictionary::adjoint(const Matrix& G) const {
  if (G.rows() != m1_ || G.cols() != m2_) throw ShapeError("adjoint argument has the wrong shape");
  Vector out = Vector::Zero(n_atoms_);
  switch (kind_) {
    case DictionaryKind::GroupEffects:
      for (Eigen::Index j = 0; j < m2_; ++j)
        for (Eigen::Index i = 0; i < m1_; ++i)
          out(assignment_[static_cast<std::size_t>(i)] * m2_ + j) += G(i, j);
      break;
    case DictionaryKind::RowColumn:
      out.head(m1_) = G.rowwise().sum();
      out.tail(m2_) = G.colwise().sum().transpose();
      break;
    default:
      for (Eigen::Index k = 0; k < n_atoms_; ++k) {
        double acc = 0.0;
        for_each_entry(k, [&](Eigen::Index i, Eigen::Index j, double v) { acc += v * G(i, j); });
        out(k) = acc;
      }
      break;
  }
  return out;
}

double Dictionary::gram_quadratic(const Vector& alpha, const Matrix& W) const {
  if (W.rows() != m1_ || W.cols() != m2_) throw ShapeError("weight matrix has the wrong shape");
  const Matrix f = apply(alpha);
  return (W.array() * f.array().square()).sum();
}

Matrix Dictionary::dense_atom(Eigen::Index k) const {
  if (k < 0 || k >= n_atoms_) throw InvalidInput("atom index out of range");
  Matrix out = Matrix::Zero(m1_, m2_);
  for_each_entry(k, [&](Eigen::Index i, Eigen::Index j, double v) { out(i, j) = v; });
  return out;
}

DictionaryMetadata Dictionary::metadata(std::size_t atom_cap) const {
  switch (kind_) {
    case DictionaryKind::GroupEffects: {
      std::size_t lo = members_.front().size(), hi = lo;
      for (const auto& g : members_) {
        lo = std::min(lo, g.size());
        hi = std::max(hi, g.size());
      }
      return {static_cast<double>(hi), u_overlap_, static_cast<double>(lo), 0.0};
    }
    case DictionaryKind::RowColumn: {
      const double M = static_cast<double>(std::max(m1_, m2_));
      const double m = static_cast<double>(std::min(m1_, m2_));
      // row atom i meets each column atom in exactly one cell
      return {M, u_overlap_, m, M};
    }
    case DictionaryKind::Corruptions:
      if (cells_.empty()) return {0.0, 0.0, 0.0, 0.0};
      return {1.0, u_overlap_, 1.0, 0.0};
    case DictionaryKind::Custom:
      break;
  }

  if (static_cast<std::size_t>(n_atoms_) > atom_cap)
    throw InvalidInput("custom dictionary has " + std::to_string(n_atoms_) +
                       " atoms, above the metadata cap of " + std::to_string(atom_cap));
  if (n_atoms_ == 0) return {0.0, 0.0, 0.0, 0.0};

  double u_max = 0.0;
  for (const auto& atom : atoms_) {
    double norm1 = 0.0;
    for (const auto& e : atom) norm1 += std::abs(e.value);
    u_max = std::max(u_max, norm1);
  }

  // Sparse Gram: atoms sharing a cell contribute to ⟨U^k, U^l⟩.
  std::map<Cell, std::vector<std::pair<Eigen::Index, double>>> by_cell;
  for (Eigen::Index k = 0; k < n_atoms_; ++k)
    for (const auto& e : atoms_[static_cast<std::size_t>(k)]) by_cell[{e.row, e.col}].push_back({k, e.value});
  std::map<std::pair<Eigen::Index, Eigen::Index>, double> gram;
  for (const auto& [cell, touching] : by_cell)
    for (const auto& [k, vk] : touching)
      for (const auto& [l, vl] : touching) gram[{k, l}] += vk * vl;

  Vector diag = Vector::Zero(n_atoms_);
  Vector off = Vector::Zero(n_atoms_);
  for (const auto& [kl, v] : gram) {
    if (kl.first == kl.second)
      diag(kl.first) = v;
    else
      off(kl.first) += std::abs(v);
  }
  const double tau = off.maxCoeff();

  double kappa_sq = 0.0;
  if (n_atoms_ <= kDenseGramLimit) {
    Matrix G = Matrix::Zero(n_atoms_, n_atoms_);
    for (const auto& [kl, v] : gram) G(kl.first, kl.second) = v;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(G, Eigen::EigenvaluesOnly);
    kappa_sq = std::max(0.0, eig.eigenvalues().minCoeff());
  } else {
    kappa_sq = std::max(0.0, (diag - off).minCoeff());
  }
  return {u_max, u_overlap_, kappa_sq, tau};
}

Dictionary Dictionary::permuted_rows(std::span<const Eigen::Index> perm) const {
  if (static_cast<Eigen::Index>(perm.size()) != m1_) throw ShapeError("permutation length mismatch");
  std::vector<Eigen::Index> inverse(perm.size(), -1);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const Eigen::Index p = perm[i];
    if (p < 0 || p >= m1_ || inverse[static_cast<std::size_t>(p)] != -1)
      throw InvalidInput("not a permutation");
    inverse[static_cast<std::size_t>(p)] = static_cast<Eigen::Index>(i);
  }
  switch (kind_) {
    case DictionaryKind::GroupEffects: {
      std::vector<int> a(perm.size());
      for (std::size_t i = 0; i < perm.size(); ++i) a[i] = assignment_[static_cast<std::size_t>(perm[i])];
      return group_effects(m1_, m2_, std::move(a));
    }
    case DictionaryKind::RowColumn:
      return row_column(m1_, m2_);
    case DictionaryKind::Corruptions: {
      auto cells = cells_;
      for (auto& c : cells) c.first = inverse[static_cast<std::size_t>(c.first)];
      return corruptions(m1_, m2_, std::move(cells));
    }
    case DictionaryKind::Custom: {
      auto atoms = atoms_;
      for (auto& atom : atoms)
        for (auto& e : atom) e.row = inverse[static_cast<std::size_t>(e.row)];
      return custom(m1_, m2_, std::move(atoms));
    }
  }
  return *this;
}

// ---------------------------------------------------------------------------
// JSON descriptor

Dictionary parse_dictionary(const nlohmann::json& j, Eigen::Index m1, Eigen::Index m2) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "groups") {
      const auto& raw = j.at("assignment");
      if (!raw.is_array()) throw InvalidInput("group assignment must be an array");
      std::vector<int> assignment;
      assignment.reserve(raw.size());
      if (!raw.empty() && raw.front().is_string()) {
        std::map<std::string, int> levels;
        for (std::size_t i = 0; i < raw.size(); ++i) {
          if (!raw[i].is_string()) throw InvalidInput("row " + std::to_string(i) + " is not assigned to a group");
          levels.emplace(raw[i].get<std::string>(), 0);
        }
        int next = 0;
        for (auto& [label, id] : levels) id = next++;
        for (const auto& v : raw) assignment.push_back(levels.at(v.get<std::string>()));
      } else {
        std::map<long, int> levels;
        for (std::size_t i = 0; i < raw.size(); ++i) {
          if (!raw[i].is_number_integer())
            throw InvalidInput("row " + std::to_string(i) + " is not assigned to a group");
          levels.emplace(raw[i].get<long>(), 0);
        }
        int next = 0;
        for (auto& [label, id] : levels) id = next++;
        for (const auto& v : raw) assignment.push_back(levels.at(v.get<long>()));
      }
      return Dictionary::group_effects(m1, m2, std::move(assignment));
    }
    if (type == "rowcol") return Dictionary::row_column(m1, m2);
    if (type == "corruptions") {
      std::vector<Cell> cells;
      for (const auto& c : j.at("cells")) cells.emplace_back(c.at(0).get<Eigen::Index>(), c.at(1).get<Eigen::Index>());
      return Dictionary::corruptions(m1, m2, std::move(cells));
    }
    if (type == "custom") {
      std::vector<std::vector<AtomEntry>> atoms;
      for (const auto& a : j.at("atoms")) {
        std::vector<AtomEntry> atom;
        for (const auto& t : a)
          atom.push_back({t.at(0).get<Eigen::Index>(), t.at(1).get<Eigen::Index>(), t.at(2).get<double>()});
        atoms.push_back(std::move(atom));
      }
      return Dictionary::custom(m1, m2, std::move(atoms));
    }
    if (type == "none") return Dictionary::none(m1, m2);
    throw InvalidInput("unknown dictionary type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed dictionary descriptor: ") + e.what());
  }
}

Dictionary read_dictionary(const std::filesystem::path& path, Eigen::Index m1, Eigen::Index m2) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dictionary file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("malformed dictionary JSON in " + path.string() + ": " + e.what());
  }
  return parse_dictionary(j, m1, m2);
}

nlohmann::json dictionary_to_json(const Dictionary& dict) {
  switch (dict.kind()) {
    case DictionaryKind::GroupEffects:
      return {{"type", "groups"}, {"assignment", dict.assignment()}};
    case DictionaryKind::RowColumn:
      return {{"type", "rowcol"}};
    case DictionaryKind::Corruptions: {
      nlohmann::json cells = nlohmann::json::array();
      for (const auto& c : dict.cells()) cells.push_back({c.first, c.second});
      return {{"type", "corruptions"}, {"cells", cells}};
    }
    case DictionaryKind::Custom: {
      if (dict.size() == 0) return {{"type", "none"}};
      nlohmann::json atoms = nlohmann::json::array();
      for (const auto& atom : dict.atoms()) {
        nlohmann::json a = nlohmann::json::array();
        for (const auto& e : atom) a.push_back({e.row, e.col, e.value});
        atoms.push_back(a);
      }
      return {{"type", "custom"}, {"atoms", atoms}};
    }
  }
  return {};
}

}  // namespace mimi

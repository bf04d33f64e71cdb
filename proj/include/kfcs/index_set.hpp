#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>
#include <vector>

#include "kfcs/errors.hpp"

namespace kfcs {

/// A strictly increasing set of coordinate indices.
///
/// Used for supports and support deltas. Always sorted and duplicate-free;
/// set algebra is linear-time merging.
class IndexSet {
public:
    IndexSet() = default;

    IndexSet(std::initializer_list<int> init) : idx_(init) { normalize(); }

    explicit IndexSet(std::vector<int> indices) : idx_(std::move(indices)) { normalize(); }

    static IndexSet range(int count) {
        std::vector<int> v(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) v[static_cast<std::size_t>(i)] = i;
        return IndexSet(std::move(v));
    }

    int size() const { return static_cast<int>(idx_.size()); }
    bool empty() const { return idx_.empty(); }
    int operator[](int i) const { return idx_[static_cast<std::size_t>(i)]; }
    const std::vector<int>& indices() const { return idx_; }

    auto begin() const { return idx_.begin(); }
    auto end() const { return idx_.end(); }

    bool contains(int i) const {
        return std::binary_search(idx_.begin(), idx_.end(), i);
    }

    /// Position of index i within the set, or -1 if absent.
    int position_of(int i) const {
        auto it = std::lower_bound(idx_.begin(), idx_.end(), i);
        if (it == idx_.end() || *it != i) return -1;
        return static_cast<int>(it - idx_.begin());
    }

    IndexSet set_union(const IndexSet& other) const {
        std::vector<int> out;
        out.reserve(idx_.size() + other.idx_.size());
        std::set_union(idx_.begin(), idx_.end(), other.idx_.begin(), other.idx_.end(),
                       std::back_inserter(out));
        return IndexSet(std::move(out));
    }

    IndexSet set_difference(const IndexSet& other) const {
        std::vector<int> out;
        std::set_difference(idx_.begin(), idx_.end(), other.idx_.begin(), other.idx_.end(),
                            std::back_inserter(out));
        return IndexSet(std::move(out));
    }

    IndexSet set_intersection(const IndexSet& other) const {
        std::vector<int> out;
        std::set_intersection(idx_.begin(), idx_.end(), other.idx_.begin(), other.idx_.end(),
                              std::back_inserter(out));
        return IndexSet(std::move(out));
    }

    /// |A Δ B|, the size of the symmetric difference.
    int symmetric_difference_size(const IndexSet& other) const {
        return set_difference(other).size() + other.set_difference(*this).size();
    }

    /// All indices in [0, m) not in this set.
    IndexSet complement(int m) const {
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(m) - idx_.size());
        std::size_t k = 0;
        for (int i = 0; i < m; ++i) {
            if (k < idx_.size() && idx_[k] == i) {
                ++k;
            } else {
                out.push_back(i);
            }
        }
        return IndexSet(std::move(out));
    }

    bool is_subset_of(const IndexSet& other) const {
        return std::includes(other.idx_.begin(), other.idx_.end(), idx_.begin(), idx_.end());
    }

    bool operator==(const IndexSet& other) const { return idx_ == other.idx_; }
    bool operator!=(const IndexSet& other) const { return idx_ != other.idx_; }

    void require_within(int m, const char* what = "index set") const {
        if (!idx_.empty() && (idx_.front() < 0 || idx_.back() >= m)) {
            throw ContractViolation(std::string(what) + ": index out of range [0, " +
                                    std::to_string(m) + ")");
        }
    }

    std::string to_string() const {
        std::string s = "{";
        for (std::size_t i = 0; i < idx_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(idx_[i]);
        }
        s += "}";
        return s;
    }

private:
    void normalize() {
        std::sort(idx_.begin(), idx_.end());
        idx_.erase(std::unique(idx_.begin(), idx_.end()), idx_.end());
        if (!idx_.empty() && idx_.front() < 0) {
            throw ContractViolation("IndexSet: negative index");
        }
    }

    std::vector<int> idx_;
};

} // namespace kfcs

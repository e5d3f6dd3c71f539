#ifndef PIPEPLAN_VERTEX_SET_HPP
#define PIPEPLAN_VERTEX_SET_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace pipeplan {

// Set of non-negative layer ids backed by a bit mask. The mask widens on
// demand, and trailing zero words are trimmed after every mutation so that
// equality, ordering and hashing do not depend on the universe a set was
// built against.
class VertexSet {
public:
    VertexSet() = default;
    VertexSet(std::initializer_list<int> ids) {
        for (int id : ids) set(id);
    }

    static VertexSet single(int id) {
        VertexSet s;
        s.set(id);
        return s;
    }

    bool test(int id) const {
        std::size_t w = static_cast<std::size_t>(id) >> 6;
        if (id < 0 || w >= words_.size()) return false;
        return (words_[w] >> (id & 63)) & 1u;
    }

    void set(int id) {
        std::size_t w = static_cast<std::size_t>(id) >> 6;
        if (w >= words_.size()) words_.resize(w + 1, 0);
        words_[w] |= std::uint64_t{1} << (id & 63);
    }

    void reset(int id) {
        std::size_t w = static_cast<std::size_t>(id) >> 6;
        if (id < 0 || w >= words_.size()) return;
        words_[w] &= ~(std::uint64_t{1} << (id & 63));
        trim();
    }

    bool empty() const { return words_.empty(); }

    int count() const {
        int n = 0;
        for (auto w : words_) n += __builtin_popcountll(w);
        return n;
    }

    // other is a subset of this
    bool contains_all(const VertexSet& other) const {
        if (other.words_.size() > words_.size()) return false;
        for (std::size_t i = 0; i < other.words_.size(); ++i)
            if (other.words_[i] & ~words_[i]) return false;
        return true;
    }

    bool intersects(const VertexSet& other) const {
        std::size_t n = std::min(words_.size(), other.words_.size());
        for (std::size_t i = 0; i < n; ++i)
            if (words_[i] & other.words_[i]) return true;
        return false;
    }

    VertexSet& operator|=(const VertexSet& o) {
        if (o.words_.size() > words_.size()) words_.resize(o.words_.size(), 0);
        for (std::size_t i = 0; i < o.words_.size(); ++i) words_[i] |= o.words_[i];
        return *this;
    }

    VertexSet& operator&=(const VertexSet& o) {
        if (words_.size() > o.words_.size()) words_.resize(o.words_.size());
        for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= o.words_[i];
        trim();
        return *this;
    }

    VertexSet& operator-=(const VertexSet& o) {
        std::size_t n = std::min(words_.size(), o.words_.size());
        for (std::size_t i = 0; i < n; ++i) words_[i] &= ~o.words_[i];
        trim();
        return *this;
    }

    friend VertexSet operator|(VertexSet a, const VertexSet& b) { return a |= b; }
    friend VertexSet operator&(VertexSet a, const VertexSet& b) { return a &= b; }
    friend VertexSet operator-(VertexSet a, const VertexSet& b) { return a -= b; }

    bool operator==(const VertexSet& o) const { return words_ == o.words_; }
    bool operator!=(const VertexSet& o) const { return words_ != o.words_; }

    // Canonical order: the set containing the lowest id on which the two
    // differ sorts first. Total, deterministic, universe independent.
    bool canonical_less(const VertexSet& o) const {
        std::size_t n = std::max(words_.size(), o.words_.size());
        for (std::size_t i = 0; i < n; ++i) {
            std::uint64_t a = i < words_.size() ? words_[i] : 0;
            std::uint64_t b = i < o.words_.size() ? o.words_[i] : 0;
            if (a != b) {
                std::uint64_t diff = a ^ b;
                std::uint64_t low = diff & (~diff + 1);
                return (a & low) != 0;
            }
        }
        return false;
    }

    std::vector<int> ids() const {
        std::vector<int> out;
        for_each([&](int id) { out.push_back(id); });
        return out;
    }

    template <class F>
    void for_each(F&& fn) const {
        for (std::size_t i = 0; i < words_.size(); ++i) {
            std::uint64_t w = words_[i];
            while (w) {
                int bit = __builtin_ctzll(w);
                fn(static_cast<int>(i * 64 + bit));
                w &= w - 1;
            }
        }
    }

    int first() const {
        for (std::size_t i = 0; i < words_.size(); ++i)
            if (words_[i]) return static_cast<int>(i * 64 + __builtin_ctzll(words_[i]));
        return -1;
    }

    std::size_t hash() const {
        std::uint64_t h = 1469598103934665603ull;
        for (auto w : words_) {
            h ^= w;
            h *= 1099511628211ull;
        }
        return static_cast<std::size_t>(h);
    }

private:
    std::vector<std::uint64_t> words_;

    void trim() {
        while (!words_.empty() && words_.back() == 0) words_.pop_back();
    }
};

struct VertexSetHash {
    std::size_t operator()(const VertexSet& s) const { return s.hash(); }
};

struct VertexSetCanonicalLess {
    bool operator()(const VertexSet& a, const VertexSet& b) const { return a.canonical_less(b); }
};

} // namespace pipeplan

#endif

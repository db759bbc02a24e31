#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "esmer/rng.hpp"
#include "esmer/stream.hpp"

namespace esmer {

struct BufferItem {
  LabeledSample sample;
  std::optional<std::vector<double>> stored_logits;  // frozen at insertion
  std::int64_t insertion_step = 0;
};

// Fixed-capacity episodic memory maintained with reservoir sampling over the
// candidate stream. candidates_seen counts offered candidates only, so each
// candidate ends up stored with probability capacity / candidates_seen.
class EpisodicBuffer {
 public:
  EpisodicBuffer(int capacity, std::uint64_t seed);

  // One reservoir decision; returns true if the item was stored.
  bool offer(BufferItem item);

  // Draws k items: without replacement when k <= size, with replacement
  // otherwise. Returns an empty batch from an empty buffer.
  std::vector<BufferItem> sample(int k, SplitMix64& rng) const;

  // Fraction of stored items carrying a noisy label; 0 when empty.
  double noise_fraction() const;

  const std::vector<BufferItem>& items() const { return items_; }
  int capacity() const { return capacity_; }
  std::int64_t candidates_seen() const { return candidates_seen_; }
  bool empty() const { return items_.empty(); }
  int size() const { return static_cast<int>(items_.size()); }

  std::uint64_t rng_state() const { return rng_.state(); }
  void restore(std::vector<BufferItem> items, std::int64_t candidates_seen,
               std::uint64_t rng_state);

 private:
  int capacity_;
  std::vector<BufferItem> items_;
  std::int64_t candidates_seen_ = 0;
  SplitMix64 rng_;
};

// CSV dump of the buffer contents (id, observed label, true label, noise
// flag, insertion step) for purity analysis.
void dump_buffer_csv(const EpisodicBuffer& buffer, std::ostream& out);

}  // namespace esmer

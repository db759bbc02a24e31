#include "esmer/buffer.hpp"

#include <numeric>

#include "esmer/errors.hpp"

namespace esmer {

EpisodicBuffer::EpisodicBuffer(int capacity, std::uint64_t seed)
    : capacity_(capacity), rng_(seed) {
  if (capacity < 1) {
    throw InvalidInput("episodic buffer: capacity must be >= 1");
  }
  items_.reserve(capacity);
}

bool EpisodicBuffer::offer(BufferItem item) {
  ++candidates_seen_;
  if (static_cast<int>(items_.size()) < capacity_) {
    items_.push_back(std::move(item));
    return true;
  }
  const std::uint64_t j = rng_.next_below(static_cast<std::uint64_t>(candidates_seen_));
  if (j < static_cast<std::uint64_t>(capacity_)) {
    items_[j] = std::move(item);
    return true;
  }
  return false;
}

std::vector<BufferItem> EpisodicBuffer::sample(int k, SplitMix64& rng) const {
  if (k < 0) {
    throw InvalidInput("buffer sample: k must be >= 0");
  }
  std::vector<BufferItem> out;
  if (items_.empty() || k == 0) {
    return out;
  }
  out.reserve(k);
  const int n = static_cast<int>(items_.size());
  if (k <= n) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < k; ++i) {
      const std::size_t j = i + rng.next_below(n - i);
      std::swap(idx[i], idx[j]);
      out.push_back(items_[idx[i]]);
    }
  } else {
    for (int i = 0; i < k; ++i) {
      out.push_back(items_[rng.next_below(n)]);
    }
  }
  return out;
}

double EpisodicBuffer::noise_fraction() const {
  if (items_.empty()) return 0.0;
  int noisy = 0;
  for (const BufferItem& item : items_) {
    if (item.sample.is_noisy) ++noisy;
  }
  return static_cast<double>(noisy) / items_.size();
}

void EpisodicBuffer::restore(std::vector<BufferItem> items, std::int64_t candidates_seen,
                             std::uint64_t rng_state) {
  if (static_cast<int>(items.size()) > capacity_) {
    throw InvalidInput("buffer restore: item count exceeds capacity");
  }
  items_ = std::move(items);
  candidates_seen_ = candidates_seen;
  rng_.set_state(rng_state);
}

void dump_buffer_csv(const EpisodicBuffer& buffer, std::ostream& out) {
  out << "id,label,true_label,is_noisy,insertion_step\n";
  for (const BufferItem& item : buffer.items()) {
    out << item.sample.id << ',' << item.sample.label << ',' << item.sample.true_label << ','
        << (item.sample.is_noisy ? 1 : 0) << ',' << item.insertion_step << '\n';
  }
}

}  // namespace esmer

#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "rct/geometry.hpp"

namespace rct {

/// Single-channel image, row-major, intensities in [0, 1].
struct GrayFrame {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  GrayFrame() = default;
  GrayFrame(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  FrameDims dims() const { return {width, height}; }
  bool empty() const { return pixels.empty(); }
};

/// 8-bit RGB image used for visualisation output.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // rgbrgb...

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}
};

/// Random access to the frames of one video, numbered 1..count().
///
/// Frames are produced on demand so long videos never need to be resident
/// at once.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual int count() const = 0;
  virtual FrameDims dims() const = 0;
  virtual GrayFrame load(int frame) const = 0;
};

/// Frame source backed by a generator function.
class FunctionFrameSource : public FrameSource {
 public:
  FunctionFrameSource(int count, FrameDims dims, std::function<GrayFrame(int)> fn)
      : count_(count), dims_(dims), fn_(std::move(fn)) {}
  int count() const override { return count_; }
  FrameDims dims() const override { return dims_; }
  GrayFrame load(int frame) const override { return fn_(frame); }

 private:
  int count_;
  FrameDims dims_;
  std::function<GrayFrame(int)> fn_;
};

/// Frame source over frames already in memory (frame f is frames[f-1]).
class MemoryFrameSource : public FrameSource {
 public:
  explicit MemoryFrameSource(std::vector<GrayFrame> frames) : frames_(std::move(frames)) {}
  int count() const override { return static_cast<int>(frames_.size()); }
  FrameDims dims() const override {
    return frames_.empty() ? FrameDims{} : frames_.front().dims();
  }
  GrayFrame load(int frame) const override { return frames_.at(frame - 1); }

 private:
  std::vector<GrayFrame> frames_;
};

/// Small LRU cache of derived per-frame data (e.g. image pyramids).
template <typename Value>
class FrameCache {
 public:
  explicit FrameCache(std::size_t capacity) : capacity_(capacity) {}

  std::shared_ptr<const Value> get(int frame, const std::function<Value(int)>& make) {
    std::lock_guard lock(mu_);
    if (auto it = index_.find(frame); it != index_.end()) {
      order_.splice(order_.begin(), order_, it->second);
      return it->second->second;
    }
    auto value = std::make_shared<const Value>(make(frame));
    order_.emplace_front(frame, value);
    index_[frame] = order_.begin();
    if (order_.size() > capacity_) {
      index_.erase(order_.back().first);
      order_.pop_back();
    }
    return value;
  }

 private:
  using Entry = std::pair<int, std::shared_ptr<const Value>>;
  std::size_t capacity_;
  std::list<Entry> order_;
  std::unordered_map<int, typename std::list<Entry>::iterator> index_;
  std::mutex mu_;
};

}  // namespace rct

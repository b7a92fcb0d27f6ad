#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "aoibench/time.hpp"

namespace aoibench::mq {

enum class QueuePolicy { FifoUnbounded, FifoBounded, DropHead };

enum class PushOutcome { Stored, Replaced, BlockedThenStored };

struct QueueCounters {
    uint64_t pushed = 0;
    uint64_t popped = 0;
    uint64_t dropped = 0;
    int64_t producer_block_ns = 0;
};

class QueueClosed : public std::runtime_error {
  public:
    QueueClosed() : std::runtime_error("queue closed") {}
};

// Single-producer single-consumer buffer between message generation and the
// network sender.
//
//  - FifoUnbounded: stores everything, never blocks.
//  - FifoBounded(capacity): the producer parks while the queue is full.
//  - DropHead: one slot; a push replaces any unpopped occupant without
//    blocking, and each replacement counts as a drop.
template <typename T>
class MessageQueue {
  public:
    explicit MessageQueue(QueuePolicy policy, size_t capacity = 0)
        : policy_(policy), capacity_(capacity) {
        if (policy == QueuePolicy::FifoBounded && capacity < 1)
            throw std::invalid_argument("bounded queue needs capacity >= 1");
    }

    PushOutcome push(T item) {
        std::unique_lock lk(m_);
        if (closed_) throw QueueClosed();

        if (policy_ == QueuePolicy::DropHead) {
            PushOutcome out = PushOutcome::Stored;
            if (!items_.empty()) {
                items_.pop_front();
                ++counters_.dropped;
                out = PushOutcome::Replaced;
            }
            items_.push_back(std::move(item));
            ++counters_.pushed;
            not_empty_.notify_one();
            return out;
        }

        PushOutcome out = PushOutcome::Stored;
        if (policy_ == QueuePolicy::FifoBounded && items_.size() >= capacity_) {
            int64_t t0 = now_ns();
            not_full_.wait(lk, [&] { return items_.size() < capacity_ || closed_; });
            counters_.producer_block_ns += now_ns() - t0;
            if (closed_) throw QueueClosed();
            out = PushOutcome::BlockedThenStored;
        }
        items_.push_back(std::move(item));
        ++counters_.pushed;
        not_empty_.notify_one();
        return out;
    }

    // Blocks while empty; returns nullopt once closed and drained.
    std::optional<T> pop() {
        std::unique_lock lk(m_);
        not_empty_.wait(lk, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        ++counters_.popped;
        not_full_.notify_one();
        return item;
    }

    // Blocking batch pop: waits for at least one item, then takes everything
    // queued at that instant in a single lock acquisition. A batch therefore
    // never exceeds the queue's occupancy — a one-slot queue yields one item
    // per call even when the producer is waiting to push. Empty means closed
    // and drained.
    std::vector<T> drain() {
        std::unique_lock lk(m_);
        not_empty_.wait(lk, [&] { return !items_.empty() || closed_; });
        std::vector<T> out;
        out.reserve(items_.size());
        while (!items_.empty()) {
            out.push_back(std::move(items_.front()));
            items_.pop_front();
        }
        counters_.popped += out.size();
        not_full_.notify_all();
        return out;
    }

    // Non-blocking pop used by the sender to drain a batch.
    std::optional<T> try_pop() {
        std::lock_guard lk(m_);
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        ++counters_.popped;
        not_full_.notify_one();
        return item;
    }

    void close() {
        std::lock_guard lk(m_);
        closed_ = true;
        not_empty_.notify_all();
        not_full_.notify_all();
    }

    size_t occupancy() const {
        std::lock_guard lk(m_);
        return items_.size();
    }

    QueueCounters counters() const {
        std::lock_guard lk(m_);
        return counters_;
    }

    QueuePolicy policy() const { return policy_; }

  private:
    const QueuePolicy policy_;
    const size_t capacity_;
    mutable std::mutex m_;
    std::condition_variable not_empty_;
    std::condition_variable not_full_;
    std::deque<T> items_;
    QueueCounters counters_;
    bool closed_ = false;
};

}  // namespace aoibench::mq

// Copyright 2026 The emgseq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "emgseq/common.hpp"
#include "emgseq/mat.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace emgseq {
namespace threading {

namespace {

class Pool {
public:
    static Pool& instance() {
        static Pool pool;
        return pool;
    }

    int size() const { return num_threads_; }

    void resize(int n) {
        n = std::max(1, n);
        std::lock_guard<std::mutex> guard(api_mutex_);
        stop_workers();
        num_threads_ = n;
        start_workers();
    }

    void run(std::int64_t n, std::int64_t min_parallel,
             const std::function<void(std::int64_t, std::int64_t)>& fn) {
        if (n <= 0) return;
        if (num_threads_ <= 1 || n < min_parallel) {
            fn(0, n);
            return;
        }
        std::lock_guard<std::mutex> guard(api_mutex_);
        const int workers = static_cast<int>(std::min<std::int64_t>(num_threads_, n));
        const std::int64_t chunk = (n + workers - 1) / workers;

        task_fn_ = &fn;
        task_n_ = n;
        task_chunk_ = chunk;
        pending_.store(workers - 1, std::memory_order_release);
        {
            std::lock_guard<std::mutex> lk(wake_mutex_);
            active_workers_ = workers - 1;
            generation_++;
        }
        wake_cv_.notify_all();

        fn(0, std::min<std::int64_t>(chunk, n));  // caller takes the first chunk

        if (workers > 1) {
            std::unique_lock<std::mutex> lk(done_mutex_);
            done_cv_.wait(lk, [this] { return pending_.load(std::memory_order_acquire) == 0; });
        }
        task_fn_ = nullptr;
    }

private:
    Pool() {
        num_threads_ = static_cast<int>(std::thread::hardware_concurrency());
        if (num_threads_ <= 0) num_threads_ = 1;
        start_workers();
    }

    ~Pool() { stop_workers(); }

    void start_workers() {
        shutdown_ = false;
        for (int i = 1; i < num_threads_; ++i) {
            workers_.emplace_back([this, i] { worker_loop(i); });
        }
    }

    void stop_workers() {
        {
            std::lock_guard<std::mutex> lk(wake_mutex_);
            shutdown_ = true;
            generation_++;
        }
        wake_cv_.notify_all();
        for (auto& t : workers_) t.join();
        workers_.clear();
    }

    void worker_loop(int index) {
        std::uint64_t seen = 0;
        while (true) {
            {
                std::unique_lock<std::mutex> lk(wake_mutex_);
                wake_cv_.wait(lk, [this, &seen] { return shutdown_ || generation_ != seen; });
                seen = generation_;
                if (shutdown_) return;
                if (index > active_workers_) continue;  // not part of this dispatch
            }
            const std::int64_t begin = index * task_chunk_;
            const std::int64_t end = std::min<std::int64_t>(begin + task_chunk_, task_n_);
            if (begin < end) (*task_fn_)(begin, end);
            if (pending_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
                std::lock_guard<std::mutex> lk(done_mutex_);
                done_cv_.notify_all();
            }
        }
    }

    int num_threads_ = 1;
    std::vector<std::thread> workers_;
    std::mutex api_mutex_;

    std::mutex wake_mutex_;
    std::condition_variable wake_cv_;
    std::uint64_t generation_ = 0;
    int active_workers_ = 0;
    bool shutdown_ = false;

    const std::function<void(std::int64_t, std::int64_t)>* task_fn_ = nullptr;
    std::int64_t task_n_ = 0;
    std::int64_t task_chunk_ = 0;
    std::atomic<int> pending_{0};
    std::mutex done_mutex_;
    std::condition_variable done_cv_;
};

}  // namespace

int num_threads() { return Pool::instance().size(); }

void set_num_threads(int n) { Pool::instance().resize(n); }

void parallel_for(std::int64_t n, std::int64_t min_parallel,
                  const std::function<void(std::int64_t, std::int64_t)>& fn) {
    Pool::instance().run(n, min_parallel, fn);
}

}  // namespace threading

namespace linalg {

namespace {
// Rows per chunk must amount to roughly this much multiply-add work before a
// parallel dispatch pays for itself.
constexpr std::int64_t kMinParallelWork = 1 << 21;

std::int64_t min_rows_for(std::int64_t work_per_row) {
    return std::max<std::int64_t>(8, kMinParallelWork / std::max<std::int64_t>(1, work_per_row));
}
}  // namespace

void matmul_nt(const MatF& a, const MatF& b, MatF& c) {
    const std::int64_t m = a.rows, k = a.cols, n = b.rows;
    c.rows = m;
    c.cols = n;
    c.v.assign(static_cast<std::size_t>(m * n), 0.0f);
    threading::parallel_for(m, min_rows_for(k * n), [&](std::int64_t r0, std::int64_t r1) {
        for (std::int64_t i = r0; i < r1; ++i) {
            const float* ai = a.row(i);
            float* ci = c.row(i);
            for (std::int64_t j = 0; j < n; ++j) {
                const float* bj = b.row(j);
                float acc = 0.0f;
                for (std::int64_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
                ci[j] = acc;
            }
        }
    });
}

void matmul_nn(const MatF& a, const MatF& b, MatF& c) {
    const std::int64_t m = a.rows, k = a.cols, n = b.cols;
    c.rows = m;
    c.cols = n;
    c.v.assign(static_cast<std::size_t>(m * n), 0.0f);
    threading::parallel_for(m, min_rows_for(k * n), [&](std::int64_t r0, std::int64_t r1) {
        for (std::int64_t i = r0; i < r1; ++i) {
            const float* ai = a.row(i);
            float* ci = c.row(i);
            for (std::int64_t p = 0; p < k; ++p) {
                const float av = ai[p];
                if (av == 0.0f) continue;
                const float* bp = b.row(p);
                for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
            }
        }
    });
}

void matmul_tn_acc(const MatF& a, const MatF& b, MatF& c) {
    const std::int64_t k = a.rows, m = a.cols, n = b.cols;
    threading::parallel_for(m, min_rows_for(k * n), [&](std::int64_t r0, std::int64_t r1) {
        for (std::int64_t p = 0; p < k; ++p) {
            const float* ap = a.row(p);
            const float* bp = b.row(p);
            for (std::int64_t i = r0; i < r1; ++i) {
                const float av = ap[i];
                if (av == 0.0f) continue;
                float* ci = c.row(i);
                for (std::int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
            }
        }
    });
}

void add_inplace(MatF& a, const MatF& b) {
    for (std::size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
}

}  // namespace linalg
}  // namespace emgseq

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

namespace urllc::des
{
    /// Integer microseconds since simulation start.
    struct SimTime
    {
        std::int64_t us = 0;

        static constexpr SimTime from_us(std::int64_t v) noexcept { return SimTime{v}; }
        static constexpr SimTime from_ms(std::int64_t v) noexcept { return SimTime{v * 1000}; }
        /// Rounds to the nearest microsecond.
        static SimTime from_ms(double v) noexcept;

        constexpr double ms() const noexcept { return static_cast<double>(us) / 1000.0; }

        friend constexpr auto operator<=>(SimTime, SimTime) = default;
        friend constexpr SimTime operator+(SimTime a, SimTime b) noexcept { return SimTime{a.us + b.us}; }
        friend constexpr SimTime operator-(SimTime a, SimTime b) noexcept { return SimTime{a.us - b.us}; }
        constexpr SimTime &operator+=(SimTime o) noexcept
        {
            us += o.us;
            return *this;
        }
    };

    struct Event
    {
        SimTime fire_at;
        std::uint64_t seq = 0;
        // Opaque to the engine; each simulator defines its own tag enumeration.
        std::uint32_t tag = 0;
        std::uint64_t payload = 0;

        friend bool operator==(const Event &, const Event &) = default;
    };

    using EventHandle = std::uint64_t;

    /// Thrown when an event would fire before the current simulation time.
    class SchedulingError : public std::logic_error
    {
    public:
        using std::logic_error::logic_error;
    };

    // Single-threaded event loop ordered by (fire_at, seq). Equal timestamps run
    // in insertion order.
    class Engine
    {
    public:
        using Handler = std::function<void(Engine &, const Event &)>;

        SimTime now() const noexcept { return m_now; }
        std::size_t pending() const noexcept { return m_queue.size(); }
        bool empty() const noexcept { return m_queue.empty(); }
        /// Fire time of the earliest pending event; requires !empty().
        SimTime next_time() const { return m_queue.top().fire_at; }

        EventHandle schedule(SimTime fire_at, std::uint32_t tag, std::uint64_t payload = 0);
        EventHandle schedule_in(SimTime delay, std::uint32_t tag, std::uint64_t payload = 0)
        {
            return schedule(m_now + delay, tag, payload);
        }

        // Runs every event with fire_at <= deadline. `now` advances to each
        // processed event's time and is left at the last one; it never jumps to
        // the deadline, so an empty queue leaves `now` unchanged.
        std::size_t run_until(SimTime deadline, const Handler &handler);

        /// Record every processed event (for replay comparison).
        void enable_trace(bool on = true) { m_tracing = on; }
        const std::vector<Event> &trace() const noexcept { return m_trace; }
        /// FNV-1a digest over the processed-event trace.
        std::uint64_t trace_digest() const noexcept;

    private:
        struct Later
        {
            bool operator()(const Event &a, const Event &b) const noexcept
            {
                if (a.fire_at != b.fire_at)
                {
                    return a.fire_at > b.fire_at;
                }
                return a.seq > b.seq;
            }
        };

        std::priority_queue<Event, std::vector<Event>, Later> m_queue;
        SimTime m_now{};
        std::uint64_t m_next_seq = 0;
        bool m_tracing = false;
        std::vector<Event> m_trace;
    };
}

#include "urllc/des/engine.hpp"

#include "urllc/des/rng.hpp"

#include <cmath>
#include <string>
#include <string_view>

namespace urllc::des
{
    SimTime SimTime::from_ms(double v) noexcept
    {
        return SimTime{static_cast<std::int64_t>(std::llround(v * 1000.0))};
    }

    EventHandle Engine::schedule(SimTime fire_at, std::uint32_t tag, std::uint64_t payload)
    {
        if (fire_at < m_now)
        {
            throw SchedulingError("schedule: event tag " + std::to_string(tag) + " at t=" +
                                  std::to_string(fire_at.us) + "us precedes now=" + std::to_string(m_now.us) + "us");
        }
        const EventHandle seq = m_next_seq++;
        m_queue.push(Event{fire_at, seq, tag, payload});
        return seq;
    }

    std::size_t Engine::run_until(SimTime deadline, const Handler &handler)
    {
        std::size_t processed = 0;
        while (!m_queue.empty() && m_queue.top().fire_at <= deadline)
        {
            const Event ev = m_queue.top();
            m_queue.pop();
            m_now = ev.fire_at;
            if (m_tracing)
            {
                m_trace.push_back(ev);
            }
            ++processed;
            handler(*this, ev);
        }
        return processed;
    }

    std::uint64_t Engine::trace_digest() const noexcept
    {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const Event &ev : m_trace)
        {
            const std::uint64_t words[4] = {static_cast<std::uint64_t>(ev.fire_at.us), ev.seq, ev.tag, ev.payload};
            for (std::uint64_t w : words)
            {
                char bytes[8];
                for (int i = 0; i < 8; ++i)
                {
                    bytes[i] = static_cast<char>((w >> (8 * i)) & 0xff);
                }
                h = fnv1a64(std::string_view(bytes, 8), h);
            }
        }
        return h;
    }
}

#include "ucbqr/dispatch.hpp"

namespace ucbqr {

DispatchState::DispatchState(int num_types, int num_servers)
    : type_queues(static_cast<std::size_t>(num_types)),
      virtual_queues(static_cast<std::size_t>(num_servers)),
      servers(static_cast<std::size_t>(num_servers)) {}

std::size_t DispatchState::waiting_count() const {
    std::size_t n = 0;
    for (const auto& q : type_queues) n += q.size();
    for (const auto& q : virtual_queues) n += q.size();
    return n;
}

}  // namespace ucbqr

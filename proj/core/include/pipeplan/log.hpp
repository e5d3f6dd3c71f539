#ifndef PIPEPLAN_LOG_HPP
#define PIPEPLAN_LOG_HPP

#include <string>

namespace pipeplan {

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// Verbosity comes from the PICO_LOG environment variable
// (error | info | debug, default error). Messages go to stderr.
LogLevel log_level();
void log(LogLevel level, const std::string& message);
inline void log_error(const std::string& m) { log(LogLevel::Error, m); }
inline void log_info(const std::string& m) { log(LogLevel::Info, m); }
inline void log_debug(const std::string& m) { log(LogLevel::Debug, m); }

} // namespace pipeplan

#endif

#ifndef NM_NM_H
#define NM_NM_H

/* C interface to the network-management library.
 *
 * Every call returns an nm_status (or NULL for constructors). On failure the
 * calling thread's last error holds a message and the underlying error name;
 * read them with nm_last_error() / nm_last_error_name().
 *
 * Functions producing structured output hand back a JSON document in a
 * heap string that the caller releases with nm_string_free(). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define NM_API __attribute__((visibility("default")))
#else
#define NM_API
#endif

typedef enum nm_status {
  NM_OK = 0,
  NM_ERR_ARGUMENT = 1, /* bad argument, OID or configuration */
  NM_ERR_CONNECT = 2,  /* agent unreachable */
  NM_ERR_AGENT = 3,    /* agent answered with an error */
  NM_ERR_DENIED = 4,   /* agent denied access */
  NM_ERR_TIMEOUT = 5,
  NM_ERR_STOPPED = 6, /* session already closed */
  NM_ERR_IO = 7,      /* file or socket failure */
  NM_ERR_DATA = 8,    /* malformed MIB, RAF, key or message */
  NM_ERR_INTERNAL = 9
} nm_status;

typedef struct nm_manager nm_manager;
typedef struct nm_session nm_session;
typedef struct nm_poll nm_poll;
typedef struct nm_agent nm_agent;

/* Receives one JSON event (poll sample or trap report). Runs on a library
 * thread; the string is only valid during the call. */
typedef void (*nm_event_fn)(const char* event_json, void* user);

NM_API const char* nm_last_error(void);
/* Error name such as "Timeout" or, for agent errors, the agent's reason. */
NM_API const char* nm_last_error_name(void);
NM_API const char* nm_status_name(nm_status status);
NM_API void nm_string_free(char* s);

/* ---- offline tools ---- */

/* Parses a MIB text file and writes its RAF. record_count may be NULL. */
NM_API nm_status nm_mib_compile(const char* mib_path, const char* raf_path, size_t* record_count);

/* Writes a key pair file; public_path (optional) receives the public half. */
NM_API nm_status nm_keygen(unsigned bits, const char* private_path, const char* public_path);

/* ---- manager ---- */

/* config_json (may be NULL) keys: community, key_file, log_file,
 * discovery_port, announce_port, timeout_ms, retries, connect_timeout_ms. */
NM_API nm_manager* nm_manager_new(const char* config_json);
NM_API void nm_manager_free(nm_manager* m);

/* Broadcasts a probe; *agents_json receives [{host,tcp_port,udp_port}]. */
NM_API nm_status nm_discover(nm_manager* m, const char* broadcast, int timeout_ms, char** agents_json);
/* Starts the announce listener (idempotent). */
NM_API nm_status nm_manager_listen(nm_manager* m);
NM_API nm_status nm_manager_agents(nm_manager* m, char** agents_json);
/* Operation log tail as JSON lines of {ts,agent,type,oid,outcome,rtt_us}. */
NM_API nm_status nm_manager_log(nm_manager* m, size_t n, char** log_json);

/* transport is "tcp" or "udp"; community NULL uses the manager's. */
NM_API nm_session* nm_session_open(nm_manager* m, const char* host, uint16_t tcp_port, uint16_t udp_port,
                                   const char* transport, const char* community, int secure);

/* type: get, getnext, set, describe, next_level, upper_level. value is
 * used by set only. *result_json receives
 *   {"type","fields":[...], "rtt_us", "encrypted"}
 * plus "instance","value_type","value" for value requests,
 * "record":{name,syntax,access,status,description} for describe and
 * "levels":[{name,id}] for level requests. */
NM_API nm_status nm_session_request(nm_session* s, const char* type, const char* oid, const char* value,
                                    char** result_json);
/* Root level received at open time, as [{name,id}]. */
NM_API nm_status nm_session_root(nm_session* s, char** levels_json);
/* NULL transport/community and secure < 0 leave a setting unchanged. */
NM_API nm_status nm_session_configure(nm_session* s, const char* transport, const char* community, int secure);
/* Sends CONNECTION_RELEASE and frees the handle. */
NM_API void nm_session_close(nm_session* s);

/* Events: {"kind":"poll","oid","ts","ok","value"}. */
NM_API nm_poll* nm_poll_start(nm_manager* m, nm_session* s, const char* oid, int period_ms, nm_event_fn fn,
                              void* user);
NM_API nm_status nm_poll_set_period(nm_poll* p, int period_ms);
NM_API void nm_poll_stop(nm_poll* p);

/* Events: {"kind":"trap","id","instance","value","threshold","agent_ms",
 * "from"}. report_port 0 picks a free port. */
NM_API nm_status nm_trap_subscribe(nm_manager* m, nm_session* s, const char* oid, double threshold, int period_ms,
                                   uint16_t report_port, nm_event_fn fn, void* user, uint32_t* subscription_id);

/* host NULL reports every cell unavailable. *report_json receives
 * {"text","lines":[...],"cells":[{type,group,secure,transport,available,
 * samples,mean_us,median_us,p95_us}]}. */
NM_API nm_status nm_bench(nm_manager* m, const char* host, uint16_t tcp_port, uint16_t udp_port, int samples,
                          char** report_json);

/* ---- agent ---- */

/* Loads a key=value config file and starts serving. */
NM_API nm_agent* nm_agent_start(const char* config_path);
/* Any output pointer may be NULL. */
NM_API void nm_agent_ports(const nm_agent* a, uint16_t* tcp_port, uint16_t* udp_port, uint16_t* discovery_port);
/* Sends the farewell, stops and frees. */
NM_API void nm_agent_stop(nm_agent* a);

#ifdef __cplusplus
}
#endif

#endif

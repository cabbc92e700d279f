/* mlp_plugin.h - the plugin-side view of the mlp host interface.
 *
 * A plugin is a shared library that exports:
 *
 *   uint32_t mlp_abi_version;            set to MLP_ABI_VERSION
 *   void mlp_init(const mlp_host_table *t);
 *
 * and one zero-argument, void entry point per extern predicate.  The
 * loader checks mlp_abi_version, calls mlp_init once with the host call
 * table, and resolves every entry symbol named in the program's extern
 * table.  Entry points read their inputs from argument registers via the
 * typed getters and produce outputs via the return functions; register
 * indices are 1-based and correspond to the predicate's arguments in
 * order.
 *
 * Failure protocol: fail(), a failed return_* unification, or a type
 * fault sets the machine's failure flag.  Once set, the remaining host
 * calls in the same invocation are inert; the wrapper should return
 * promptly.  The machine checks the flag when the entry point returns
 * and backtracks if it is set.
 *
 * Slot order in mlp_host_table is normative and versioned: slots are
 * only ever appended, and api_version says how many are valid.
 */

#ifndef MLP_PLUGIN_H
#define MLP_PLUGIN_H

#include <stdint.h>

#define MLP_ABI_VERSION 1u

typedef struct mlp_host_table {
    uint32_t api_version;

    /* v1 */
    int64_t (*get_int)(int32_t reg);
    double  (*get_real)(int32_t reg);
    int64_t (*get_string_len)(int32_t reg);          /* UTF-8 byte length */
    int64_t (*get_string)(int32_t reg, char *buf, int64_t cap);
    void    (*return_int)(int32_t reg, int64_t v);
    void    (*return_real)(int32_t reg, double v);
    void    (*return_string)(int32_t reg, const char *data, int64_t len);
    void    (*fail)(void);

    /* v2 (api_version >= 2): compound-term marshalling for generated
     * wrappers; not provided by v1 hosts. */
    int64_t (*get_ctor_arg_int)(int32_t reg, int32_t k);
    void    (*return_ctor)(int32_t reg, const char *ctor, int32_t arity);
    void    (*set_ctor_arg_int)(int32_t reg, int32_t k, int64_t v);
} mlp_host_table;

#endif /* MLP_PLUGIN_H */

/* math plugin: trigonometric extern predicates for the mlp runtime.
 *
 * Each wrapper reads its input from argument register 1, calls the C
 * library, and unifies the result into register 2.  The host checks the
 * failure flag after the wrapper returns, so a failed unification (for
 * example sin(0.0, 1.0)) simply backtracks.
 *
 * Build: make  (produces libmath.so next to this file)
 */

#include <math.h>

#include "mlp_plugin.h"

static const mlp_host_table *T;

uint32_t mlp_abi_version = MLP_ABI_VERSION;

void mlp_init(const mlp_host_table *t)
{
    T = t;
}

void sin_wrapper(void)
{
    double x = T->get_real(1);
    T->return_real(2, sin(x));
}

void cos_wrapper(void)
{
    double x = T->get_real(1);
    T->return_real(2, cos(x));
}

void tan_wrapper(void)
{
    double x = T->get_real(1);
    T->return_real(2, tan(x));
}

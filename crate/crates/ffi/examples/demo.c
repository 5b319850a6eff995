/* Build: cc demo.c -I../include -L../../../target/debug -ltropical_ot_ffi -lpthread -ldl -lm */
#include <stdio.h>
#include <stdlib.h>
#include "tropical_ot.h"

int main(void) {
    double x[3] = {0.0, 1.0, 3.0}, y[3] = {1.0, -1.0, 2.0}, d;
    if (trop_dist(x, y, 3, &d) != TROP_STATUS_OK) return 1;
    printf("trop_dist = %.6f\n", d);

    enum { N = 8 };
    double q0[N * N] = {0}, q1[N * N] = {0};
    q0[2 * N + 2] = 1.0;
    q1[5 * N + 2] = 1.0;
    TropSolverConfig cfg;
    trop_config_default_w1(&cfg);
    TropW1Solution *sol = NULL;
    TropStatus s = trop_w1_solve(N, N, 1.0 / N, q0, q1, &cfg, &sol);
    if (s != TROP_STATUS_OK) {
        char msg[256];
        trop_last_error_message(msg, sizeof msg);
        fprintf(stderr, "error %d: %s\n", (int)s, msg);
        return 1;
    }
    double w1;
    uint64_t iters;
    bool conv;
    trop_w1_distance(sol, &w1);
    trop_w1_status(sol, &iters, &conv);
    printf("w1 = %.6f iterations = %llu converged = %d\n", w1, (unsigned long long)iters, (int)conv);
    trop_w1_free(sol);

    double half[N * N];
    for (int i = 0; i < N * N; i++) half[i] = q1[i] * 0.5;
    s = trop_w1_solve(N, N, 1.0 / N, q0, half, &cfg, &sol);
    printf("unequal masses -> status %d\n", (int)s);
    return s == TROP_STATUS_INFEASIBLE ? 0 : 1;
}

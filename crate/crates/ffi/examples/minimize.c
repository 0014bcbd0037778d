/* Minimal C client: runs the fractal preset on a small budget. */
#include <math.h>
#include <stdio.h>

#include "scoreopt.h"

int main(void) {
    const char *overrides[] = {"optimizer.tn=5", "optimizer.train.steps=20", "optimizer.pool_size=512",
                               "optimizer.cold_steps=20"};
    ScoreoptConfig *cfg = NULL;
    if (scoreopt_config_from_preset("fractal", overrides, 4, &cfg) != SCOREOPT_STATUS_OK) {
        fprintf(stderr, "config: %s\n", scoreopt_last_error());
        return 1;
    }
    ScoreoptResult *res = NULL;
    ScoreoptStatus st = scoreopt_run(cfg, 7, &res);
    scoreopt_config_free(cfg);
    if (st != SCOREOPT_STATUS_OK) {
        fprintf(stderr, "run: %s\n", scoreopt_last_error());
        scoreopt_result_free(res);
        return 1;
    }
    double x, f;
    bool feasible;
    scoreopt_result_solution(res, 0, &x, 1, &f, &feasible);
    printf("x=%.6f objective=%.6f\n", x, f);
    scoreopt_result_free(res);
    return isfinite(f) ? 0 : 1;
}

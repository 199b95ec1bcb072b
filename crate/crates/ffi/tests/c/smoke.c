#include <math.h>
#include <stdio.h>
#include "srcf.h"

static int32_t square_sum(void *ud, const double *x, size_t n, double *out, size_t out_len) {
    (void)ud;
    double s = 0.0;
    for (size_t i = 0; i < n; i++) s += x[i] * x[i];
    for (size_t j = 0; j < out_len; j++) out[j] = s;
    return 0;
}

static int32_t identity(void *ud, const double *x, size_t n, double *out, size_t out_len) {
    (void)ud;
    (void)n;
    for (size_t j = 0; j < out_len; j++) out[j] = x[j];
    return 0;
}

int main(void) {
    SrcfScheme scheme = {SRCF_SCHEME_KIND_SIF5, 4, 0};
    SrcfRule *rule = NULL;
    if (srcf_rule_build(&scheme, 3, 7, &rule) != SRCF_STATUS_OK) return 1;
    size_t len = srcf_rule_len(rule);
    double w[64];
    if (len > 64 || srcf_rule_weights(rule, w, len) != SRCF_STATUS_OK) return 2;
    double total = 0.0;
    for (size_t i = 0; i < len; i++) total += w[i];
    srcf_rule_free(rule);
    if (fabs(total - 1.0) > 1e-12) return 3;

    double mean[2] = {1.0, -1.0};
    double cov[4] = {2.0, 0.5, 0.5, 1.0};
    double out = 0.0;
    if (srcf_expect(&scheme, 2, mean, cov, square_sum, NULL, 1, &out, 1) != SRCF_STATUS_OK) return 4;
    /* E|x|^2 = tr(P) + |m|^2 = 5 */
    if (fabs(out - 5.0) > 1e-9) return 5;

    double q[4] = {1.0, 0.0, 0.0, 1.0};
    double r[4] = {0.5, 0.0, 0.0, 0.5};
    SrcfModel model = {2, 2, identity, identity, NULL, q, r};
    SrcfFilter *filter = NULL;
    if (srcf_filter_new(&model, &scheme, mean, cov, 3, &filter) != SRCF_STATUS_OK) return 6;
    double y[2] = {0.3, 0.1};
    if (srcf_filter_step(filter, y, 2) != SRCF_STATUS_OK) return 7;
    if (srcf_filter_step(filter, y, 3) != SRCF_STATUS_INVALID_ARGUMENT) return 8;
    if (srcf_last_error_message()[0] == '\0') return 9;
    double m[2];
    if (srcf_filter_mean(filter, m, 2) != SRCF_STATUS_OK) return 10;
    srcf_filter_free(filter);
    printf("ok %s %.6f %.6f\n", srcf_version(), m[0], m[1]);
    return 0;
}

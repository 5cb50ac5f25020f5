#include <stdio.h>
#include <string.h>
#include "predsearch.h"

int main(int argc, char **argv) {
    uint64_t keys[] = {3, 7, 9};
    PredConfig cfg = pred_config_default(8, 64, 12);
    PredHandle *h = NULL;
    if (pred_build(keys, 3, &cfg, &h) != PRED_STATUS_OK) {
        fprintf(stderr, "build: %s\n", pred_last_error());
        return 1;
    }
    PredAnswer a;
    if (pred_query(h, 8, &a) != PRED_STATUS_OK || !a.found || a.key != 7) return 2;
    if (pred_query(h, 2, &a) != PRED_STATUS_OK || a.found) return 3;
    if (argc > 1) {
        if (pred_save(h, argv[1]) != PRED_STATUS_OK) return 4;
        PredHandle *g = NULL;
        if (pred_load(argv[1], &g) != PRED_STATUS_OK) return 5;
        if (pred_query(g, 200, &a) != PRED_STATUS_OK || a.key != 9) return 6;
        pred_free(g);
    }
    uint64_t dup[] = {5, 5};
    PredHandle *bad = NULL;
    if (pred_build(dup, 2, &cfg, &bad) != PRED_STATUS_INGEST || bad != NULL) return 7;
    if (strstr(pred_last_error(), "line") == NULL) return 8;
    printf("bits=%llu\n", (unsigned long long)pred_bits_used(h));
    pred_free(h);
    return 0;
}

// Per-record privacy indicator shown after a response is stored.
//
// The stored subset hides the respondent among the population share it
// covers; the badge reports the complementary leakage 1 - coverage.
// It needs a published population estimate keyed by label and is
// hidden (null) when none is available or labels are missing from it.

export type PublishedEstimate = Record<string, number>;

export function sizeLeakage(
  storedLabels: string[],
  published: PublishedEstimate | null | undefined,
): number | null {
  if (!published || storedLabels.length === 0) {
    return null;
  }
  let coverage = 0;
  for (const label of storedLabels) {
    const mass = published[label];
    if (mass === undefined || !Number.isFinite(mass)) {
      return null;
    }
    coverage += mass;
  }
  return Math.min(1, Math.max(0, 1 - coverage));
}

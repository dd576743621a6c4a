/** Identity colors: a pure function of the track id's stable hash. */

export function colorForHash(idHash: number): string {
  const hue = idHash % 360;
  const light = 45 + (Math.floor(idHash / 360) % 3) * 10;
  return `hsl(${hue}, 75%, ${light}%)`;
}

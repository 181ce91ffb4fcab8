// Fixed 8-token palette, assigned in card-creation order; mirrors the token
// list used by the server's figure renderer so exports match the screen.
export const PALETTE = [
  "#4c78a8",
  "#f58518",
  "#54a24b",
  "#e45756",
  "#72b7b2",
  "#eeca3b",
  "#b279a2",
  "#9d755d",
] as const;

export function colorFor(index: number): string {
  return PALETTE[index % PALETTE.length];
}

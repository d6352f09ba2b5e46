// 8x11 bitmap font (thresholded from a public-domain fixed-width raster
// font); each glyph is 11 row bitmasks, bit x = pixel column x.
export const FONT_WIDTH = 8;
export const FONT_HEIGHT = 11;
export const GLYPHS: Record<string, number[]> = {
  " ": [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
  "!": [0, 2, 2, 2, 2, 2, 2, 0, 2, 0, 0],
  "\"": [0, 6, 6, 6, 0, 0, 0, 0, 0, 0, 0],
  "#": [0, 16, 4, 4, 30, 8, 30, 10, 2, 0, 0],
  "$": [0, 8, 42, 10, 14, 24, 40, 42, 28, 8, 0],
  "%": [0, 34, 5, 21, 10, 40, 84, 80, 34, 0, 0],
  "&": [0, 28, 2, 34, 124, 34, 34, 34, 60, 0, 0],
  "'": [0, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0],
  "(": [0, 4, 0, 2, 2, 2, 2, 2, 4, 4, 0],
  ")": [0, 1, 0, 2, 2, 2, 2, 2, 1, 1, 0],
  "*": [0, 0, 0, 0, 8, 8, 8, 20, 0, 0, 0],
  "+": [0, 0, 0, 8, 8, 62, 8, 8, 0, 0, 0],
  ",": [0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0],
  "-": [0, 0, 0, 0, 0, 3, 0, 0, 0, 0, 0],
  ".": [0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0],
  "/": [0, 4, 4, 0, 2, 2, 0, 0, 1, 0, 0],
  "0": [0, 14, 17, 17, 17, 17, 17, 17, 14, 0, 0],
  "1": [0, 12, 10, 8, 8, 8, 8, 8, 8, 0, 0],
  "2": [0, 12, 18, 16, 16, 8, 4, 2, 30, 0, 0],
  "3": [0, 14, 16, 16, 12, 16, 17, 17, 14, 0, 0],
  "4": [0, 16, 24, 20, 20, 18, 62, 16, 16, 0, 0],
  "5": [0, 30, 0, 0, 15, 17, 16, 17, 14, 0, 0],
  "6": [0, 14, 18, 1, 13, 17, 17, 17, 14, 0, 0],
  "7": [0, 31, 16, 8, 8, 4, 4, 2, 2, 0, 0],
  "8": [0, 14, 17, 17, 14, 17, 17, 17, 14, 0, 0],
  "9": [0, 14, 17, 17, 17, 22, 16, 9, 14, 0, 0],
  ":": [0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0],
  ";": [0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0],
  "<": [0, 0, 0, 0, 24, 6, 2, 8, 0, 0, 0],
  "=": [0, 0, 0, 0, 30, 0, 30, 0, 0, 0, 0],
  ">": [0, 0, 0, 0, 6, 24, 16, 4, 0, 0, 0],
  "?": [0, 6, 9, 8, 8, 4, 4, 0, 4, 0, 0],
  "@": [0, 112, 140, 116, 74, 74, 42, 210, 4, 56, 0],
  "A": [0, 8, 12, 20, 16, 30, 34, 34, 33, 0, 0],
  "B": [0, 30, 34, 34, 2, 62, 34, 34, 30, 0, 0],
  "C": [0, 28, 34, 33, 1, 1, 33, 34, 28, 0, 0],
  "D": [0, 30, 34, 66, 66, 66, 66, 34, 30, 0, 0],
  "E": [0, 30, 2, 2, 2, 30, 2, 2, 62, 0, 0],
  "F": [0, 30, 2, 2, 2, 30, 2, 2, 2, 0, 0],
  "G": [0, 28, 34, 33, 1, 49, 33, 34, 46, 0, 0],
  "H": [0, 66, 66, 66, 66, 126, 66, 66, 66, 0, 0],
  "I": [0, 2, 2, 2, 2, 2, 2, 2, 2, 0, 0],
  "J": [0, 16, 16, 16, 16, 16, 18, 18, 12, 0, 0],
  "K": [0, 34, 18, 10, 10, 14, 10, 18, 34, 0, 0],
  "L": [0, 2, 2, 2, 2, 2, 2, 2, 62, 0, 0],
  "M": [0, 198, 198, 198, 130, 170, 170, 146, 146, 0, 0],
  "N": [0, 70, 70, 74, 74, 82, 82, 98, 98, 0, 0],
  "O": [0, 28, 34, 65, 65, 65, 65, 34, 28, 0, 0],
  "P": [0, 30, 34, 34, 34, 30, 2, 2, 2, 0, 0],
  "Q": [0, 28, 34, 65, 65, 65, 65, 34, 60, 0, 0],
  "R": [0, 30, 34, 34, 34, 30, 2, 34, 34, 0, 0],
  "S": [0, 28, 34, 2, 12, 48, 32, 34, 28, 0, 0],
  "T": [0, 62, 8, 8, 8, 8, 8, 8, 8, 0, 0],
  "U": [0, 34, 34, 34, 34, 34, 34, 34, 28, 0, 0],
  "V": [0, 33, 34, 34, 18, 20, 20, 12, 8, 0, 0],
  "W": [0, 49, 50, 50, 34, 10, 200, 204, 196, 0, 0],
  "X": [0, 34, 18, 20, 12, 12, 20, 18, 34, 0, 0],
  "Y": [0, 34, 34, 20, 28, 8, 8, 8, 8, 0, 0],
  "Z": [0, 62, 32, 16, 8, 8, 4, 2, 62, 0, 0],
  "[": [6, 2, 2, 2, 2, 2, 2, 2, 2, 6, 0],
  "\\": [0, 1, 1, 0, 2, 2, 0, 0, 4, 0, 0],
  "]": [3, 2, 2, 2, 2, 2, 2, 2, 2, 3, 0],
  "^": [0, 0, 0, 12, 8, 2, 18, 0, 0, 0, 0],
  "_": [0, 0, 0, 0, 0, 0, 0, 0, 0, 14, 0],
  "`": [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
  "a": [0, 0, 0, 6, 9, 12, 9, 9, 15, 0, 0],
  "b": [0, 2, 2, 30, 34, 34, 34, 34, 30, 0, 0],
  "c": [0, 0, 0, 14, 17, 1, 1, 17, 14, 0, 0],
  "d": [0, 16, 16, 30, 17, 17, 17, 17, 30, 0, 0],
  "e": [0, 0, 0, 14, 17, 31, 1, 17, 14, 0, 0],
  "f": [0, 2, 2, 6, 2, 2, 2, 2, 2, 0, 0],
  "g": [0, 0, 0, 30, 17, 17, 17, 17, 30, 17, 14],
  "h": [0, 2, 2, 30, 34, 34, 34, 34, 34, 0, 0],
  "i": [0, 0, 0, 2, 2, 2, 2, 2, 2, 0, 0],
  "j": [0, 0, 0, 2, 2, 2, 2, 2, 2, 2, 3],
  "k": [0, 2, 2, 18, 10, 6, 14, 10, 18, 0, 0],
  "l": [0, 2, 2, 2, 2, 2, 2, 2, 2, 0, 0],
  "m": [0, 0, 0, 110, 146, 146, 146, 146, 146, 0, 0],
  "n": [0, 0, 0, 30, 34, 34, 34, 34, 34, 0, 0],
  "o": [0, 0, 0, 14, 17, 17, 17, 17, 14, 0, 0],
  "p": [0, 0, 0, 30, 34, 34, 34, 34, 30, 2, 2],
  "q": [0, 0, 0, 30, 17, 17, 17, 17, 30, 16, 16],
  "r": [0, 0, 0, 6, 2, 2, 2, 2, 2, 0, 0],
  "s": [0, 0, 0, 6, 9, 3, 12, 9, 6, 0, 0],
  "t": [0, 0, 2, 7, 2, 2, 2, 2, 6, 0, 0],
  "u": [0, 0, 0, 34, 34, 34, 34, 34, 60, 0, 0],
  "v": [0, 0, 0, 17, 16, 10, 10, 12, 4, 0, 0],
  "w": [0, 0, 0, 153, 25, 90, 82, 102, 36, 0, 0],
  "x": [0, 0, 0, 9, 10, 4, 4, 10, 9, 0, 0],
  "y": [0, 0, 0, 17, 16, 10, 10, 4, 4, 4, 2],
  "z": [0, 0, 0, 30, 16, 8, 4, 4, 30, 0, 0],
  "{": [2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 0],
  "|": [2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 2],
  "}": [2, 2, 2, 2, 2, 2, 2, 2, 2, 2, 0],
  "~": [0, 0, 0, 0, 0, 6, 26, 0, 0, 0, 0]
};
